#include "audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "error.hpp"
#include "io_util.hpp"

namespace fs = std::filesystem;

namespace sid {

namespace {

struct WavInfo {
    int channels = 0;
    int sample_rate = 0;
    int bits = 0;
    int format = 0;  // 1 = PCM, 3 = IEEE float
    std::size_t data_offset = 0;
    std::size_t data_size = 0;
    std::size_t frames() const {
        std::size_t bytes_per_frame = static_cast<std::size_t>(channels) * (static_cast<std::size_t>(bits) / 8);
        return bytes_per_frame ? data_size / bytes_per_frame : 0;
    }
};

std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

WavInfo parse_wav_header(const std::string& buf, const std::string& origin) {
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (buf.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        fail(Errc::parse, origin + ": not a RIFF/WAVE file");
    WavInfo info;
    std::size_t pos = 12;
    bool have_fmt = false;
    while (pos + 8 <= buf.size()) {
        const unsigned char* chunk = p + pos;
        std::uint32_t size = le32(chunk + 4);
        std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (body + 16 > buf.size()) fail(Errc::parse, origin + ": truncated fmt chunk");
            info.format = le16(p + body);
            info.channels = le16(p + body + 2);
            info.sample_rate = static_cast<int>(le32(p + body + 4));
            info.bits = le16(p + body + 14);
            if (info.format == 0xFFFE && body + 26 <= buf.size()) {
                // WAVE_FORMAT_EXTENSIBLE: sub-format GUID starts with the real tag.
                info.format = le16(p + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            info.data_offset = body;
            info.data_size = std::min<std::size_t>(size, buf.size() - body);
            break;
        }
        pos = body + size + (size & 1);  // chunks are word-aligned
    }
    if (!have_fmt) fail(Errc::parse, origin + ": missing fmt chunk");
    if (info.data_offset == 0) fail(Errc::parse, origin + ": missing data chunk");
    if (info.channels <= 0 || info.sample_rate <= 0)
        fail(Errc::parse, origin + ": invalid channel count or sample rate");
    bool ok = (info.format == 1 && (info.bits == 16 || info.bits == 24 || info.bits == 32)) ||
              (info.format == 3 && (info.bits == 32 || info.bits == 64));
    if (!ok)
        fail(Errc::parse, origin + ": unsupported WAV encoding (format " + std::to_string(info.format) + ", " + std::to_string(info.bits) + " bits); expected PCM 16/24/32 or float 32/64");
    return info;
}

double read_sample(const unsigned char* p, int format, int bits) {
    if (format == 1) {
        if (bits == 16) {
            auto v = static_cast<std::int16_t>(le16(p));
            return static_cast<double>(v) / 32768.0;
        }
        if (bits == 24) {
            std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
            if (v & 0x800000) v |= static_cast<std::int32_t>(0xFF000000u);
            return static_cast<double>(v) / 8388608.0;
        }
        auto v = static_cast<std::int32_t>(le32(p));
        return static_cast<double>(v) / 2147483648.0;
    }
    if (bits == 32) {
        float f;
        std::memcpy(&f, p, 4);
        return static_cast<double>(f);
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
}

std::vector<double> resample_linear(const std::vector<double>& in, int rate_in, int rate_out) {
    if (rate_in == rate_out) return in;
    std::size_t n_out = static_cast<std::size_t>(
        (static_cast<std::uint64_t>(in.size()) * static_cast<std::uint64_t>(rate_out)) /
        static_cast<std::uint64_t>(rate_in));
    std::vector<double> out(n_out);
    double step = static_cast<double>(rate_in) / static_cast<double>(rate_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        double pos = static_cast<double>(i) * step;
        auto i0 = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(i0);
        std::size_t i1 = std::min(i0 + 1, in.size() - 1);
        out[i] = in[i0] * (1.0 - frac) + in[i1] * frac;
    }
    return out;
}

}  // namespace

Waveform decode_audio(const fs::path& path, int target_rate) {
    if (target_rate <= 0) fail(Errc::invalid, "decode_audio: non-positive target rate");
    std::string buf = read_text_file(path);
    WavInfo info = parse_wav_header(buf, path.string());
    std::size_t frames = info.frames();
    if (frames == 0) fail(Errc::parse, path.string() + ": zero-length audio stream");

    const auto* base = reinterpret_cast<const unsigned char*>(buf.data()) + info.data_offset;
    std::size_t bytes_per_sample = static_cast<std::size_t>(info.bits) / 8;
    std::vector<double> mono(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const unsigned char* fp = base + f * bytes_per_sample * static_cast<std::size_t>(info.channels);
        double acc = 0.0;
        for (int c = 0; c < info.channels; ++c)
            acc += read_sample(fp + static_cast<std::size_t>(c) * bytes_per_sample, info.format, info.bits);
        mono[f] = acc / info.channels;
    }
    Waveform w;
    w.sample_rate = target_rate;
    w.samples = resample_linear(mono, info.sample_rate, target_rate);
    if (w.samples.empty()) fail(Errc::parse, path.string() + ": zero-length audio stream after resampling");
    for (double v : w.samples)
        if (!std::isfinite(v)) fail(Errc::numeric, path.string() + ": non-finite sample in decoded audio");
    return w;
}

double probe_duration(const fs::path& path) {
    std::string buf = read_text_file(path);
    WavInfo info = parse_wav_header(buf, path.string());
    std::size_t frames = info.frames();
    if (frames == 0) fail(Errc::parse, path.string() + ": zero-length audio stream");
    return static_cast<double>(frames) / info.sample_rate;
}

void write_wav(const fs::path& path, const Waveform& w) {
    if (w.sample_rate <= 0) fail(Errc::invalid, "write_wav: non-positive sample rate");
    std::string buf;
    buf.reserve(44 + w.samples.size() * 2);
    buf.append("RIFF");
    put_u32(buf, static_cast<std::uint32_t>(36 + w.samples.size() * 2));
    buf.append("WAVEfmt ");
    put_u32(buf, 16);
    put_u32(buf, 1u | (1u << 16));  // PCM, mono (format u16 + channels u16)
    put_u32(buf, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(buf, static_cast<std::uint32_t>(w.sample_rate * 2));  // byte rate
    put_u32(buf, 2u | (16u << 16));                               // block align + bits
    buf.append("data");
    put_u32(buf, static_cast<std::uint32_t>(w.samples.size() * 2));
    for (double v : w.samples) {
        double clamped = std::clamp(v, -1.0, 1.0);
        auto s = static_cast<std::int16_t>(std::lrint(clamped * 32767.0));
        buf.push_back(static_cast<char>(s & 0xff));
        buf.push_back(static_cast<char>((s >> 8) & 0xff));
    }
    write_file_atomic(path, buf);
}

}  // namespace sid
