#include "io_util.hpp"

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace sid {

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "cannot open file: " + path.string());
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(Errc::io, "read failed: " + path.string());
    return out;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path dir = path.parent_path();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
    }
    static std::atomic<std::uint64_t> counter{0};
    std::uint64_t tag = splitmix64(static_cast<std::uint64_t>(::getpid()) ^
                                   (counter.fetch_add(1) << 20) ^
                                   std::random_device{}());
    fs::path tmp = path;
    tmp += ".tmp." + to_hex(tag);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::io, "cannot create file: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) fail(Errc::io, "write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(Errc::io, "rename failed for " + path.string() + ": " + ec.message());
    }
}

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

nlohmann::json parse_json_object(const std::string& text, const std::string& what,
                                 const std::vector<std::string>& allowed) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, what + ": " + e.what());
    }
    if (!j.is_object()) fail(Errc::parse, what + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) fail(Errc::parse, what + ": unknown key \"" + it.key() + "\"");
    }
    return j;
}

nlohmann::json load_json_file(const fs::path& path, const std::string& what,
                              const std::vector<std::string>& allowed) {
    return parse_json_object(read_text_file(path), what + " (" + path.string() + ")", allowed);
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(buf, bits);
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

void put_str(std::string& buf, std::string_view s) {
    put_u32(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s.data(), s.size());
}

void BinReader::raw(void* dst, std::size_t n) {
    if (pos_ + n > buf_.size()) fail(Errc::parse, what_ + ": truncated");
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
}

std::uint32_t BinReader::u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t BinReader::u64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double BinReader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

float BinReader::f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string BinReader::str() {
    std::uint32_t n = u32();
    if (pos_ + n > buf_.size()) fail(Errc::parse, what_ + ": truncated string");
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
}

}  // namespace sid
