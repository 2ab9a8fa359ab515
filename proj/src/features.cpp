#include "features.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io_util.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace sid {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void FeatureConfig::validate() const {
    if (sample_rate <= 0) fail(Errc::invalid, "feature config: sample_rate must be positive");
    if (!is_pow2(fft_size)) fail(Errc::invalid, "feature config: fft_size must be a power of two");
    if (hop_size <= 0) fail(Errc::invalid, "feature config: hop_size must be positive");
    if (mel_bins < 1 || mel_bins > fft_size / 2)
        fail(Errc::invalid, "feature config: mel_bins must be in [1, fft_size/2]");
    if (window_seconds <= 0.0 || hop_seconds <= 0.0)
        fail(Errc::invalid, "feature config: window_seconds and hop_seconds must be positive");
    if (log_eps <= 0.0) fail(Errc::invalid, "feature config: log_eps must be positive");
    if (samples_per_window() < fft_size)
        fail(Errc::invalid, "feature config: window shorter than one analysis frame");
}

int FeatureConfig::samples_per_window() const {
    return static_cast<int>(std::llround(window_seconds * sample_rate));
}

int FeatureConfig::frames_per_window() const {
    return 1 + (samples_per_window() - fft_size) / hop_size;
}

std::uint64_t FeatureConfig::hash() const {
    std::string canon = "sr=" + std::to_string(sample_rate) + ";mel=" + std::to_string(mel_bins) +
                        ";fft=" + std::to_string(fft_size) + ";hop=" + std::to_string(hop_size) +
                        ";win=" + fmt_double(window_seconds) + ";winhop=" + fmt_double(hop_seconds) +
                        ";eps=" + fmt_double(log_eps);
    return fnv1a64(canon.data(), canon.size());
}

static const std::vector<std::string> kFeatureKeys = {
    "sample_rate", "mel_bins", "fft_size", "hop_size",
    "window_seconds", "hop_seconds", "log_eps"};

FeatureConfig FeatureConfig::from_json_text(const std::string& text, const std::string& origin) {
    nlohmann::json j = parse_json_object(text, "feature config (" + origin + ")", kFeatureKeys);
    FeatureConfig cfg;
    try {
        if (j.contains("sample_rate")) cfg.sample_rate = j["sample_rate"].get<int>();
        if (j.contains("mel_bins")) cfg.mel_bins = j["mel_bins"].get<int>();
        if (j.contains("fft_size")) cfg.fft_size = j["fft_size"].get<int>();
        if (j.contains("hop_size")) cfg.hop_size = j["hop_size"].get<int>();
        if (j.contains("window_seconds")) cfg.window_seconds = j["window_seconds"].get<double>();
        if (j.contains("hop_seconds")) cfg.hop_seconds = j["hop_seconds"].get<double>();
        if (j.contains("log_eps")) cfg.log_eps = j["log_eps"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, "feature config (" + origin + "): " + e.what());
    }
    cfg.validate();
    return cfg;
}

FeatureConfig FeatureConfig::from_json_file(const fs::path& path) {
    return from_json_text(read_text_file(path), path.string());
}

std::string FeatureConfig::to_json() const {
    nlohmann::json j;
    j["sample_rate"] = sample_rate;
    j["mel_bins"] = mel_bins;
    j["fft_size"] = fft_size;
    j["hop_size"] = hop_size;
    j["window_seconds"] = window_seconds;
    j["hop_seconds"] = hop_seconds;
    j["log_eps"] = log_eps;
    return j.dump(2);
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const std::size_t n = re.size();
    if (n != im.size() || !is_pow2(static_cast<int>(n)))
        fail(Errc::invalid, "fft_radix2: size must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * kPi / static_cast<double>(len);
        double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::size_t a = i + k, b = i + k + len / 2;
                double tr = re[b] * cr - im[b] * ci;
                double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg) {
    cfg.validate();
    const int n_fft_bins = cfg.fft_size / 2 + 1;
    const double f_max = cfg.sample_rate / 2.0;
    const double mel_max = hz_to_mel(f_max);
    std::vector<double> edges(static_cast<std::size_t>(cfg.mel_bins) + 2);
    for (int i = 0; i < cfg.mel_bins + 2; ++i)
        edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_max * i / (cfg.mel_bins + 1));

    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.mel_bins, n_fft_bins);
    for (int m = 0; m < cfg.mel_bins; ++m) {
        double lo = edges[static_cast<std::size_t>(m)];
        double mid = edges[static_cast<std::size_t>(m) + 1];
        double hi = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < n_fft_bins; ++k) {
            double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
            double w = 0.0;
            if (f > lo && f < hi)
                w = (f <= mid) ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            fb(m, k) = w;
        }
    }
    return fb;
}

Eigen::MatrixXd log_mel(const Waveform& w, const FeatureConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(w.samples.size()) < cfg.fft_size)
        fail(Errc::invalid, "log_mel: waveform shorter than one analysis frame");
    if (w.sample_rate != cfg.sample_rate)
        fail(Errc::invalid, "log_mel: waveform rate " + std::to_string(w.sample_rate) + " does not match config rate " + std::to_string(cfg.sample_rate));

    const int n = cfg.fft_size;
    const int n_bins = n / 2 + 1;
    const int frames = 1 + (static_cast<int>(w.samples.size()) - n) / cfg.hop_size;

    std::vector<double> hann(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        hann[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);

    Eigen::MatrixXd fb = mel_filterbank(cfg);
    Eigen::MatrixXd out(cfg.mel_bins, frames);
    std::vector<double> re(static_cast<std::size_t>(n)), im(static_cast<std::size_t>(n));
    Eigen::VectorXd power(n_bins);
    for (int t = 0; t < frames; ++t) {
        const double* src = w.samples.data() + static_cast<std::size_t>(t) * cfg.hop_size;
        for (int i = 0; i < n; ++i) {
            re[static_cast<std::size_t>(i)] = src[i] * hann[static_cast<std::size_t>(i)];
            im[static_cast<std::size_t>(i)] = 0.0;
        }
        fft_radix2(re, im);
        for (int k = 0; k < n_bins; ++k)
            power(k) = re[static_cast<std::size_t>(k)] * re[static_cast<std::size_t>(k)] +
                       im[static_cast<std::size_t>(k)] * im[static_cast<std::size_t>(k)];
        out.col(t) = (fb * power).array() + cfg.log_eps;
    }
    out = out.array().log();
    if (!out.allFinite()) fail(Errc::numeric, "log_mel: non-finite output");
    return out;
}

FeatureWindow extract_window(const Waveform& track_audio, const WindowSpec& spec,
                             const FeatureConfig& cfg, const WindowProvenance& prov, int label,
                             Domain domain) {
    cfg.validate();
    if (track_audio.sample_rate != cfg.sample_rate)
        fail(Errc::invalid, "extract_window: waveform rate does not match config");
    const auto n_window = static_cast<std::size_t>(cfg.samples_per_window());
    const auto start = static_cast<std::size_t>(std::llround(spec.start * cfg.sample_rate));
    const std::size_t n_track = track_audio.samples.size();
    if (start >= n_track)
        fail(Errc::invalid, "extract_window: window start beyond end of track");
    if (!spec.padded && start + n_window > n_track)
        fail(Errc::invalid, "extract_window: window extends beyond end of track and is not flagged padded");

    Waveform slab;
    slab.sample_rate = cfg.sample_rate;
    slab.samples.assign(n_window, 0.0);
    std::size_t n_copy = std::min(n_window, n_track - start);
    std::copy_n(track_audio.samples.begin() + static_cast<std::ptrdiff_t>(start), n_copy,
                slab.samples.begin());

    Eigen::MatrixXd m = log_mel(slab, cfg);
    FeatureWindow fw;
    fw.values = m.cast<float>();
    fw.mel_bins = static_cast<int>(m.rows());
    fw.frames = static_cast<int>(m.cols());
    fw.label = (domain == Domain::source) ? label : kUnlabeled;
    fw.domain = domain;
    fw.prov = prov;
    return fw;
}

// ---- cache ----------------------------------------------------------------

namespace {

constexpr char kFeatMagic[9] = "SIDFEAT1";
constexpr std::uint32_t kFeatVersion = 1;

std::string sanitize(const std::string& s) {
    std::string out;
    bool changed = false;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-') {
            out.push_back(c);
        } else {
            out.push_back('_');
            changed = true;
        }
    }
    if (out.empty()) {
        out = "_";
        changed = true;
    }
    if (changed) out += "-" + to_hex(fnv1a64(s.data(), s.size())).substr(8);
    return out;
}

}  // namespace

fs::path cache_root(const fs::path& dir, const FeatureConfig& cfg) {
    return dir / ("cfg-" + to_hex(cfg.hash()));
}

fs::path cache_window_path(const fs::path& dir, const FeatureConfig& cfg,
                           const WindowProvenance& prov) {
    auto offset_ms = static_cast<long long>(std::llround(prov.start * 1000.0));
    return cache_root(dir, cfg) / sanitize(prov.artist) / sanitize(prov.album) /
           (sanitize(prov.track) + "@" + std::to_string(offset_ms) + ".fw");
}

void write_feature(const fs::path& file, const FeatureWindow& fw, const FeatureConfig& cfg) {
    std::string buf;
    buf.append(kFeatMagic, 8);
    put_u32(buf, kFeatVersion);
    put_u64(buf, cfg.hash());
    put_str(buf, fw.prov.artist);
    put_str(buf, fw.prov.album);
    put_str(buf, fw.prov.track);
    put_f64(buf, fw.prov.start);
    put_f64(buf, fw.prov.length);
    put_f64(buf, fw.prov.hop);
    put_u32(buf, fw.prov.padded ? 1 : 0);
    put_u32(buf, static_cast<std::uint32_t>(fw.label));
    put_u32(buf, static_cast<std::uint32_t>(fw.mel_bins));
    put_u32(buf, static_cast<std::uint32_t>(fw.frames));
    // Column-major float32 payload: frame after frame.
    buf.append(reinterpret_cast<const char*>(fw.values.data()),
               static_cast<std::size_t>(fw.mel_bins) * static_cast<std::size_t>(fw.frames) * 4);
    write_file_atomic(file, buf);
}

FeatureWindow read_feature(const fs::path& file) {
    std::string buf = read_text_file(file);
    BinReader r(buf, "feature file " + file.string());
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kFeatMagic, 8) != 0)
        fail(Errc::parse, file.string() + ": bad feature file magic");
    std::uint32_t version = r.u32();
    if (version != kFeatVersion)
        fail(Errc::parse, file.string() + ": unsupported feature file version " + std::to_string(version));
    r.u64();  // cfg hash; the index loader cross-checks it against the directory
    FeatureWindow fw;
    fw.prov.artist = r.str();
    fw.prov.album = r.str();
    fw.prov.track = r.str();
    fw.prov.start = r.f64();
    fw.prov.length = r.f64();
    fw.prov.hop = r.f64();
    fw.prov.padded = r.u32() != 0;
    fw.label = static_cast<int>(r.u32());
    fw.mel_bins = static_cast<int>(r.u32());
    fw.frames = static_cast<int>(r.u32());
    if (fw.mel_bins <= 0 || fw.frames <= 0)
        fail(Errc::parse, file.string() + ": invalid feature shape");
    fw.values.resize(fw.mel_bins, fw.frames);
    r.raw(fw.values.data(), static_cast<std::size_t>(fw.mel_bins) * static_cast<std::size_t>(fw.frames) * 4);
    if (!fw.values.allFinite()) fail(Errc::numeric, file.string() + ": non-finite feature values");
    fw.domain = Domain::source;
    return fw;
}

PrepareReport prepare_cache(const Manifest& manifest, const FeatureConfig& cfg, const fs::path& dir,
                            int jobs) {
    cfg.validate();
    if (jobs < 1) jobs = 1;
    PrepareReport report;
    std::mutex mu;
    std::vector<std::string> index_lines;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= manifest.entries.size()) break;
            const TrackRecord& tr = manifest.entries[i];
            int label = manifest.artist_index(tr.artist);
            try {
                TrackRecord probed = tr;
                probed.duration = probe_duration(tr.audio_path);
                auto plan = window_plan(probed, static_cast<int>(i), cfg.window_seconds, cfg.hop_seconds);
                // Decode lazily: a fully cached track never touches the audio.
                Waveform audio;
                bool decoded = false;
                int written = 0, skipped = 0;
                std::vector<std::string> lines;
                for (const WindowSpec& spec : plan) {
                    WindowProvenance prov{tr.artist, tr.album, tr.track,
                                          spec.start, spec.length, spec.hop, spec.padded};
                    fs::path file = cache_window_path(dir, cfg, prov);
                    if (fs::exists(file)) {
                        ++skipped;
                    } else {
                        if (!decoded) {
                            audio = decode_audio(tr.audio_path, cfg.sample_rate);
                            decoded = true;
                        }
                        FeatureWindow fw = extract_window(audio, spec, cfg, prov, label);
                        write_feature(file, fw, cfg);
                        ++written;
                    }
                    std::string rel = fs::relative(file, cache_root(dir, cfg)).string();
                    lines.push_back(tr.artist + "\t" + tr.album + "\t" + tr.track + "\t" +
                                    fmt_double(spec.start) + "\t" + fmt_double(spec.length) + "\t" +
                                    fmt_double(spec.hop) + "\t" + (spec.padded ? "1" : "0") + "\t" +
                                    std::to_string(label) + "\t" + rel);
                }
                std::lock_guard<std::mutex> lock(mu);
                report.written += written;
                report.skipped += skipped;
                index_lines.insert(index_lines.end(), lines.begin(), lines.end());
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                report.failed_tracks++;
                report.failures.emplace_back(tr.audio_path, e.what());
            }
        }
    };

    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::sort(index_lines.begin(), index_lines.end());
    std::string index_text;
    for (const auto& l : index_lines) index_text += l + "\n";
    write_file_atomic(cache_root(dir, cfg) / "index.tsv", index_text);
    write_file_atomic(cache_root(dir, cfg) / "feature_config.json", cfg.to_json() + "\n");

    if (!report.failures.empty()) {
        std::string failure_text;
        for (const auto& [path, why] : report.failures) failure_text += path + "\t" + why + "\n";
        write_file_atomic(cache_root(dir, cfg) / "failures.tsv", failure_text);
    }
    return report;
}

CacheIndex load_cache_index(const fs::path& dir, const FeatureConfig& cfg) {
    fs::path root = cache_root(dir, cfg);
    fs::path index = root / "index.tsv";
    if (!fs::exists(index))
        fail(Errc::io, "feature cache index not found: " + index.string() + " (run `prepare` first)");
    CacheIndex out;
    out.cfg = cfg;
    std::istringstream in(read_text_file(index));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 9)
            fail(Errc::parse, index.string() + ":" + std::to_string(lineno) + ": bad index record");
        CacheEntry e;
        e.prov.artist = f[0];
        e.prov.album = f[1];
        e.prov.track = f[2];
        e.prov.start = std::stod(f[3]);
        e.prov.length = std::stod(f[4]);
        e.prov.hop = std::stod(f[5]);
        e.prov.padded = f[6] == "1";
        e.label = std::stoi(f[7]);
        e.file = root / f[8];
        out.entries.push_back(std::move(e));
    }
    return out;
}

}  // namespace sid
