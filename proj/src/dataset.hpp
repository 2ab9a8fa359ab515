#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sid {

struct TrackRecord {
    std::string artist;
    std::string album;
    std::string track;
    std::string audio_path;
    std::optional<double> duration;  // seconds, filled by probing the audio
};

// Track listing plus the artist set in order of first appearance. The class
// index of an artist is its position in `artists`; training and evaluation
// must therefore run against the same manifest file.
struct Manifest {
    std::vector<TrackRecord> entries;
    std::vector<std::string> artists;

    int artist_index(const std::string& artist) const;
    std::vector<std::string> albums_of(const std::string& artist) const;
};

// Manifest file: one record per line, artist_id \t album_id \t track_id \t audio_path.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::string& origin);

struct SplitCounts {
    int train = 4;
    int val = 1;
    int test = 1;
};

enum class Part { train, val, test };

struct AlbumSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

// Album-level partition: every album of an artist lands in exactly one of
// train/val/test, so no album ever spans partitions.
struct SplitAssignment {
    std::uint64_t seed = 0;
    std::map<std::string, AlbumSplit> artists;

    std::optional<Part> part_of(const std::string& artist, const std::string& album) const;
};

SplitAssignment album_split(const Manifest& manifest, SplitCounts counts, std::uint64_t seed);

void save_split(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment load_split(const std::filesystem::path& path);

struct WindowSpec {
    int track_index = -1;  // index into Manifest::entries
    double start = 0.0;    // seconds
    double length = 30.0;  // seconds
    double hop = 10.0;     // seconds
    bool padded = false;   // track shorter than `length`; right-pad with silence
};

// Fixed-length windows at offsets 0, hop, 2*hop, ... while the window fits.
// A track shorter than `length` yields exactly one right-padded window so that
// short tracks do not silently drop out of the class balance.
std::vector<WindowSpec> window_plan(const TrackRecord& track, int track_index, double length,
                                    double hop);

}  // namespace sid
