#include "dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io_util.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace sid {

int Manifest::artist_index(const std::string& artist) const {
    for (std::size_t i = 0; i < artists.size(); ++i)
        if (artists[i] == artist) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> Manifest::albums_of(const std::string& artist) const {
    std::vector<std::string> albums;
    for (const auto& e : entries) {
        if (e.artist != artist) continue;
        if (std::find(albums.begin(), albums.end(), e.album) == albums.end())
            albums.push_back(e.album);
    }
    return albums;
}

Manifest parse_manifest(const std::string& text, const std::string& origin) {
    Manifest m;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != 4)
            fail(Errc::parse, origin + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields (artist_id, album_id, track_id, audio_path), got " + std::to_string(fields.size()));
        for (int f = 0; f < 4; ++f)
            if (fields[static_cast<std::size_t>(f)].empty())
                fail(Errc::parse, origin + ":" + std::to_string(lineno) + ": empty field " + std::to_string(f + 1));
        TrackRecord rec{fields[0], fields[1], fields[2], fields[3], std::nullopt};
        auto key = std::make_tuple(rec.artist, rec.album, rec.track);
        if (!seen.insert(key).second)
            fail(Errc::invalid, origin + ":" + std::to_string(lineno) + ": duplicate (artist, album, track) triple: " + rec.artist + "/" + rec.album + "/" + rec.track);
        if (m.artist_index(rec.artist) < 0) m.artists.push_back(rec.artist);
        m.entries.push_back(std::move(rec));
    }
    if (m.entries.empty()) fail(Errc::parse, origin + ": manifest has no records");
    return m;
}

Manifest load_manifest(const fs::path& path) {
    return parse_manifest(read_text_file(path), path.string());
}

std::optional<Part> SplitAssignment::part_of(const std::string& artist,
                                             const std::string& album) const {
    auto it = artists.find(artist);
    if (it == artists.end()) return std::nullopt;
    const AlbumSplit& s = it->second;
    if (std::find(s.train.begin(), s.train.end(), album) != s.train.end()) return Part::train;
    if (std::find(s.val.begin(), s.val.end(), album) != s.val.end()) return Part::val;
    if (std::find(s.test.begin(), s.test.end(), album) != s.test.end()) return Part::test;
    return std::nullopt;
}

SplitAssignment album_split(const Manifest& manifest, SplitCounts counts, std::uint64_t seed) {
    if (counts.train < 0 || counts.val < 0 || counts.test < 0)
        fail(Errc::invalid, "album_split: negative partition count");
    SplitAssignment out;
    out.seed = seed;
    for (const auto& artist : manifest.artists) {
        auto albums = manifest.albums_of(artist);
        // Sort before shuffling so the result depends only on the album set
        // and the seed, not on manifest line order.
        std::sort(albums.begin(), albums.end());
        int need = counts.train + counts.val + counts.test;
        if (static_cast<int>(albums.size()) < need)
            fail(Errc::invalid, "album_split: artist \"" + artist + "\" has " + std::to_string(albums.size()) + " albums but the requested counts need " + std::to_string(need));
        Rng rng = Rng::stream(seed, "album_split/" + artist);
        rng.shuffle(albums);
        AlbumSplit s;
        int i = 0;
        for (int k = 0; k < counts.train; ++k) s.train.push_back(albums[static_cast<std::size_t>(i++)]);
        for (int k = 0; k < counts.val; ++k) s.val.push_back(albums[static_cast<std::size_t>(i++)]);
        for (int k = 0; k < counts.test; ++k) s.test.push_back(albums[static_cast<std::size_t>(i++)]);
        // Albums beyond the requested counts stay in train so the union
        // always covers the artist's full album set.
        for (; i < static_cast<int>(albums.size()); ++i) s.train.push_back(albums[static_cast<std::size_t>(i)]);
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.val.begin(), s.val.end());
        std::sort(s.test.begin(), s.test.end());
        out.artists.emplace(artist, std::move(s));
    }
    return out;
}

void save_split(const SplitAssignment& split, const fs::path& path) {
    nlohmann::json j;
    j["seed"] = split.seed;
    nlohmann::json artists = nlohmann::json::object();
    for (const auto& [artist, s] : split.artists) {
        artists[artist] = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
    }
    j["artists"] = artists;
    write_file_atomic(path, j.dump(2) + "\n");
}

SplitAssignment load_split(const fs::path& path) {
    nlohmann::json j = load_json_file(path, "split file", {"seed", "artists"});
    SplitAssignment out;
    try {
        out.seed = j.at("seed").get<std::uint64_t>();
        for (auto it = j.at("artists").begin(); it != j.at("artists").end(); ++it) {
            AlbumSplit s;
            s.train = it.value().at("train").get<std::vector<std::string>>();
            s.val = it.value().at("val").get<std::vector<std::string>>();
            s.test = it.value().at("test").get<std::vector<std::string>>();
            out.artists.emplace(it.key(), std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse, "split file (" + path.string() + "): " + e.what());
    }
    // Reject files that put an album in two partitions.
    for (const auto& [artist, s] : out.artists) {
        std::set<std::string> all;
        std::size_t n = 0;
        for (const auto* v : {&s.train, &s.val, &s.test}) {
            all.insert(v->begin(), v->end());
            n += v->size();
        }
        if (all.size() != n)
            fail(Errc::invalid, "split file (" + path.string() + "): artist \"" + artist + "\" has an album in more than one partition");
    }
    return out;
}

std::vector<WindowSpec> window_plan(const TrackRecord& track, int track_index, double length,
                                    double hop) {
    if (length <= 0.0) fail(Errc::invalid, "window_plan: non-positive window length");
    if (hop <= 0.0) fail(Errc::invalid, "window_plan: non-positive hop");
    if (!track.duration.has_value())
        fail(Errc::state, "window_plan: track " + track.track + " has no probed duration");
    double duration = *track.duration;
    if (duration <= 0.0) fail(Errc::invalid, "window_plan: non-positive track duration");

    std::vector<WindowSpec> out;
    if (duration < length) {
        out.push_back(WindowSpec{track_index, 0.0, length, hop, true});
        return out;
    }
    for (int k = 0;; ++k) {
        double start = static_cast<double>(k) * hop;
        if (start + length > duration) break;
        out.push_back(WindowSpec{track_index, start, length, hop, false});
    }
    return out;
}

}  // namespace sid
