#pragma once
// Shared helpers for the test binaries: repo paths, scratch directories,
// and small fixture builders.

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ptod/types.hpp"

namespace ptest {

inline std::filesystem::path repo_dir() { return std::filesystem::path(PTOD_REPO_DIR); }

// Fresh scratch directory per call; removed eagerly so reruns start clean.
class ScratchDir {
  public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("ptod-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& file, const std::string& content) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Deterministic nonsense words, for synthetic utterances and entries.
inline std::string random_word(std::mt19937_64& rng, size_t min_len = 3, size_t max_len = 9) {
    static const char letters[] = "abcdefghijklmnopqrstuvwxyz";
    size_t len = min_len + rng() % (max_len - min_len + 1);
    std::string w;
    for (size_t i = 0; i < len; ++i) w += letters[rng() % 26];
    return w;
}

inline std::string random_sentence(std::mt19937_64& rng, size_t words) {
    std::string s;
    for (size_t i = 0; i < words; ++i) {
        if (i) s += " ";
        s += random_word(rng);
    }
    s += ".";
    return s;
}

// Minimal personalized dialogue: n system turns, texts supplied pairwise
// as (original, personalized).
inline ptod::Dialogue personalized_dialogue(
    const std::string& id, const std::string& image_id,
    const std::vector<std::pair<std::string, std::string>>& turns) {
    ptod::Dialogue d;
    d.id = id;
    d.source = ptod::Source::other;
    d.status = ptod::DialogueStatus::personalized;
    d.emotion = ptod::Emotion::neutral;
    d.image_id = image_id;
    d.impression = "an adult person, casual attire, neutral mood";
    for (size_t i = 0; i < turns.size(); ++i) {
        ptod::Turn t;
        t.index = static_cast<int>(i);
        t.user_utterance = "user turn " + std::to_string(i);
        t.revised_user = "[adult|casual|neutral] user turn " + std::to_string(i);
        t.system_utterance = turns[i].first;
        t.personalized_system = turns[i].second;
        d.turns.push_back(std::move(t));
    }
    return d;
}

}  // namespace ptest
