#pragma once

#include <filesystem>
#include <vector>

namespace sid {

struct Waveform {
    std::vector<double> samples;  // mono, [-1, 1] nominal
    int sample_rate = 0;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Reads a RIFF/WAVE file (PCM 16/24/32-bit or IEEE float 32/64), mixes to
// mono and linearly resamples to target_rate. Compressed formats are out of
// scope; convert them to WAV first (see the dataset recipe).
Waveform decode_audio(const std::filesystem::path& path, int target_rate);

// Duration in seconds from the header alone, without decoding the payload.
double probe_duration(const std::filesystem::path& path);

// 16-bit PCM writer, used by the window generators and tests.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace sid
