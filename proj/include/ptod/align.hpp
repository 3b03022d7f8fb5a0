#pragma once
// Emotion-based pairing of dialogues with persona images.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ptod/gateway.hpp"
#include "ptod/types.hpp"

namespace ptod::align {

struct PersonaImage {
    std::string image_id;  // filename stem
    std::filesystem::path path;
    ImageMetadata metadata;
};

// Scans dir (sorted by filename) and extracts metadata for each image.
std::vector<PersonaImage> load_images(const std::filesystem::path& dir, gateway::Gateway& gw);

// Pluggable utterance-level classifier; live runs may bind a hosted
// sentiment model or a gateway label prompt.
class EmotionClassifier {
  public:
    virtual ~EmotionClassifier() = default;
    virtual Emotion classify(const std::string& text) = 0;
};

class GatewayEmotionClassifier final : public EmotionClassifier {
  public:
    explicit GatewayEmotionClassifier(gateway::Gateway& gw) : gw_(gw) {}
    Emotion classify(const std::string& text) override;

  private:
    gateway::Gateway& gw_;
};

// Majority label over user utterances only; ties resolve toward neutral.
Emotion classify_dialogue_emotion(const Dialogue& dialogue, EmotionClassifier& classifier);

// dialogue id -> image id. Each classified dialogue draws uniformly (with
// replacement, seeded) from the eligible images sharing its emotion;
// dialogues whose bucket is empty stay unassigned.
std::map<std::string, std::string> pair(const std::vector<PersonaImage>& images,
                                        const std::vector<Dialogue>& dialogues, uint64_t seed);

}  // namespace ptod::align
