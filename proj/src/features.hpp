#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "audio.hpp"
#include "dataset.hpp"

namespace sid {

// Analysis parameters for the log-mel front end. `hash()` keys the feature
// cache; any change here invalidates cached windows.
struct FeatureConfig {
    int sample_rate = 16000;
    int mel_bins = 128;
    int fft_size = 2048;  // power of two; also the analysis window length
    int hop_size = 512;   // samples between analysis frames
    double window_seconds = 30.0;
    double hop_seconds = 10.0;
    double log_eps = 1e-10;

    void validate() const;
    int samples_per_window() const;
    int frames_per_window() const;
    std::uint64_t hash() const;

    static FeatureConfig from_json_file(const std::filesystem::path& path);
    static FeatureConfig from_json_text(const std::string& text, const std::string& origin);
    std::string to_json() const;
};

enum class Domain : int { target = 0, source = 1 };

struct WindowProvenance {
    std::string artist;
    std::string album;
    std::string track;
    double start = 0.0;
    double length = 0.0;
    double hop = 0.0;
    bool padded = false;
};

constexpr int kUnlabeled = -1;

// One windowed log-mel slab. Values are float32: that is the contract both in
// memory and on disk, so a cache round trip is exact.
struct FeatureWindow {
    Eigen::MatrixXf values;  // mel_bins x frames
    int mel_bins = 0;
    int frames = 0;
    int label = kUnlabeled;  // artist index, or kUnlabeled for target-domain use
    Domain domain = Domain::source;
    WindowProvenance prov;
};

// In-place FFT of `re`/`im` (size must be a power of two).
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

// Triangular mel filterbank, mel_bins x (fft_size/2 + 1). HTK mel scale
// (2595 * log10(1 + f/700)), filters spanning [0, sample_rate/2].
Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg);

// Log-mel spectrogram: left-aligned Hann frames (no centering, so a slice of
// the waveform transforms identically to a slice of the full transform),
// power spectrum, mel filtering, then log(power + log_eps).
Eigen::MatrixXd log_mel(const Waveform& w, const FeatureConfig& cfg);

// Cuts spec's window out of the track waveform and transforms it. A window
// flagged `padded` is right-padded with silence to the full window length.
FeatureWindow extract_window(const Waveform& track_audio, const WindowSpec& spec,
                             const FeatureConfig& cfg, const WindowProvenance& prov,
                             int label, Domain domain = Domain::source);

// ---- feature cache -------------------------------------------------------
//
// One file per window under <dir>/cfg-<hash>/..., binary layout documented in
// docs/formats.md and versioned via the magic/version fields. Writers always
// go temp-then-rename, so concurrent producers are safe.

std::filesystem::path cache_root(const std::filesystem::path& dir, const FeatureConfig& cfg);
std::filesystem::path cache_window_path(const std::filesystem::path& dir, const FeatureConfig& cfg,
                                        const WindowProvenance& prov);

void write_feature(const std::filesystem::path& file, const FeatureWindow& fw,
                   const FeatureConfig& cfg);
FeatureWindow read_feature(const std::filesystem::path& file);

struct CacheEntry {
    WindowProvenance prov;
    int label = kUnlabeled;
    std::filesystem::path file;
};

struct CacheIndex {
    FeatureConfig cfg;
    std::vector<CacheEntry> entries;
};

struct PrepareReport {
    int written = 0;
    int skipped = 0;  // already up to date
    int failed_tracks = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (track path, reason)
};

// Probes durations, plans windows and fills the cache for every track in the
// manifest. Idempotent: existing window files are skipped. Per-track failures
// are recorded, not fatal; the caller decides what a tolerable failure rate is.
PrepareReport prepare_cache(const Manifest& manifest, const FeatureConfig& cfg,
                            const std::filesystem::path& dir, int jobs);

CacheIndex load_cache_index(const std::filesystem::path& dir, const FeatureConfig& cfg);

}  // namespace sid
