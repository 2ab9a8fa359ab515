#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sid {

std::string read_text_file(const std::filesystem::path& path);

// All writers go through a temp-then-rename step so a crash or a concurrent
// producer never leaves a partially written file at the final path.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string to_hex(std::uint64_t v);

std::vector<std::string> split(std::string_view line, char sep);

// Parses a JSON object and rejects keys outside `allowed`. Config files are
// strict on purpose: a typo should fail loudly, not silently use a default.
nlohmann::json parse_json_object(const std::string& text, const std::string& what,
                                 const std::vector<std::string>& allowed);

nlohmann::json load_json_file(const std::filesystem::path& path, const std::string& what,
                              const std::vector<std::string>& allowed);

// Little-endian binary buffer helpers for the cache/checkpoint formats.
void put_u32(std::string& buf, std::uint32_t v);
void put_u64(std::string& buf, std::uint64_t v);
void put_f64(std::string& buf, double v);
void put_f32(std::string& buf, float v);
void put_str(std::string& buf, std::string_view s);

class BinReader {
public:
    BinReader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    float f32();
    std::string str();
    void raw(void* dst, std::size_t n);
    bool at_end() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace sid
