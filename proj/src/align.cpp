#include "ptod/align.hpp"

#include <algorithm>

#include "ptod/util/rng.hpp"

namespace ptod::align {

std::vector<PersonaImage> load_images(const std::filesystem::path& dir, gateway::Gateway& gw) {
    if (!std::filesystem::exists(dir)) throw IoError("no such image directory: " + dir.string());
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());

    std::vector<PersonaImage> images;
    images.reserve(paths.size());
    for (const auto& path : paths) {
        PersonaImage img;
        img.image_id = path.stem().string();
        img.path = path;
        img.metadata = gw.extract_image_metadata(path);
        images.push_back(std::move(img));
    }
    return images;
}

Emotion GatewayEmotionClassifier::classify(const std::string& text) {
    gateway::CompletionRequest request;
    request.template_id = "emotion_label";
    request.bindings["text"] = text;
    return emotion_from_string(gw_.complete(request).text);
}

Emotion classify_dialogue_emotion(const Dialogue& dialogue, EmotionClassifier& classifier) {
    std::map<Emotion, int> votes;
    int user_turns = 0;
    for (const auto& turn : dialogue.turns) {
        if (turn.user_utterance.empty()) continue;
        ++user_turns;
        ++votes[classifier.classify(turn.user_utterance)];
    }
    if (user_turns == 0)
        throw PreconditionError("dialogue " + dialogue.id + " has no user utterances");

    int best = 0;
    for (const auto& [emotion, count] : votes) {
        (void)emotion;
        best = std::max(best, count);
    }
    std::vector<Emotion> winners;
    for (const auto& [emotion, count] : votes)
        if (count == best) winners.push_back(emotion);
    return winners.size() == 1 ? winners.front() : Emotion::neutral;
}

std::map<std::string, std::string> pair(const std::vector<PersonaImage>& images,
                                        const std::vector<Dialogue>& dialogues, uint64_t seed) {
    // id-sorted buckets keep the draw order independent of scan order
    std::map<Emotion, std::vector<const PersonaImage*>> buckets;
    for (const auto& img : images)
        if (img.metadata.eligible()) buckets[img.metadata.emotion].push_back(&img);
    for (auto& [emotion, bucket] : buckets) {
        (void)emotion;
        std::sort(bucket.begin(), bucket.end(),
                  [](const PersonaImage* a, const PersonaImage* b) { return a->image_id < b->image_id; });
    }

    std::mt19937_64 rng(seed);
    std::map<std::string, std::string> assignment;
    for (const auto& d : dialogues) {
        if (!d.emotion) throw PreconditionError("dialogue " + d.id + " not classified before pairing");
        auto it = buckets.find(*d.emotion);
        if (it == buckets.end() || it->second.empty()) continue;  // unpaired
        const auto& bucket = it->second;
        assignment[d.id] = bucket[uniform_index(rng, bucket.size())]->image_id;
    }
    return assignment;
}

}  // namespace ptod::align
