// Mode dispatch, user-turn restyling, and system-turn personalization.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "ptod/personalize.hpp"
#include "support.hpp"

using namespace ptod;
using namespace ptod::personalize;

namespace {

constexpr const char* kAdultImpression = "a adult person, formal attire, neutral mood";

struct Setup {
    ptest::ScratchDir scratch{"personalize"};
    gateway::Gateway gw{gateway::default_catalog(), gateway::make_mock_provider(), {}};
    knowledge::KnowledgeStore store;
    knowledge::MockEmbedder embedder{32, 5};
    align::PersonaImage image;

    Setup() {
        auto img_path = scratch.path() / "persona.txt";
        ptest::write_file(img_path, "adult_formal_neu");
        image.image_id = "persona";
        image.path = img_path;
        image.metadata = gw.extract_image_metadata(img_path);

        auto kfile = scratch.path() / "k.jsonl";
        ptest::write_file(
            kfile,
            R"({"entity": "Blue Bistro", "text": "Lovely pasta at Blue Bistro."})" "\n"
            R"({"entity": "Blue Bistro", "text": "Blue Bistro has great service."})" "\n");
        store.ingest(kfile, knowledge::KnowledgeSource::review);
        store.build_index(embedder);
    }

    Personalizer make(Options options = {}) {
        return Personalizer(gw, store, default_act_mode_table(), options);
    }
};

Dialogue stylized_dialogue(const std::vector<std::pair<std::string, std::string>>& exchanges) {
    Dialogue d;
    d.id = "SD1";
    d.source = Source::other;
    d.status = DialogueStatus::stylized;
    d.image_id = "persona";
    d.emotion = Emotion::neutral;
    for (size_t i = 0; i < exchanges.size(); ++i) {
        Turn t;
        t.index = static_cast<int>(i);
        t.user_utterance = exchanges[i].first;
        t.revised_user = "[adult|formal|neutral] " + exchanges[i].first;
        t.system_utterance = exchanges[i].second;
        d.turns.push_back(std::move(t));
    }
    return d;
}

}  // namespace

TEST_CASE("mode names and the shipped act table") {
    CHECK(to_string(Mode::basic) == "basic");
    CHECK(to_string(Mode::greeting) == "greeting");
    CHECK(to_string(Mode::recommendation) == "recommendation");

    ActModeTable def = default_act_mode_table();
    CHECK(def.greeting_acts ==
          std::set<std::string>{"WELCOME", "GREET", "BYE", "THANK", "GOODBYE"});
    CHECK(def.recommend_acts == std::set<std::string>{"RECOMMEND", "OFFER"});
    CHECK(def.recommend_inform_slots == std::set<std::string>{"name"});

    ActModeTable shipped = load_act_mode_table(ptest::repo_dir() / "data/act_modes.json");
    CHECK(shipped.greeting_acts == def.greeting_acts);
    CHECK(shipped.recommend_acts == def.recommend_acts);
    CHECK(shipped.recommend_inform_slots == def.recommend_inform_slots);

    CHECK_THROWS_AS(load_act_mode_table("/no/such/table.json"), IoError);
    ptest::ScratchDir scratch("actmodes");
    ptest::write_file(scratch.path() / "bad.json", "{nope");
    CHECK_THROWS_AS(load_act_mode_table(scratch.path() / "bad.json"), ParseError);
}

TEST_CASE("select_mode dispatches on act categories") {
    ActModeTable table = default_act_mode_table();

    CHECK(select_mode({}, table) == Mode::basic);
    CHECK(select_mode({{"NOTIFY_SUCCESS", "restaurant", "none"}}, table) == Mode::basic);
    CHECK(select_mode({{"INFORM", "restaurant", "area"}}, table) == Mode::basic);

    CHECK(select_mode({{"RECOMMEND", "hotel", "none"}}, table) == Mode::recommendation);
    CHECK(select_mode({{"OFFER", "restaurant", "restaurant_name"}}, table) ==
          Mode::recommendation);
    CHECK(select_mode({{"INFORM", "restaurant", "name"}}, table) == Mode::recommendation);

    CHECK(select_mode({{"BYE", "general", "none"}}, table) == Mode::greeting);
    // Greeting dominates regardless of position.
    std::vector<PolicyAct> acts{{"RECOMMEND", "hotel", "none"},
                                {"INFORM", "restaurant", "name"},
                                {"THANK", "general", "none"},
                                {"NOTIFY_SUCCESS", "restaurant", "none"}};
    std::sort(acts.begin(), acts.end());
    do {
        CHECK(select_mode(acts, table) == Mode::greeting);
    } while (std::next_permutation(acts.begin(), acts.end()));

    std::vector<PolicyAct> rec{{"OFFER", "restaurant", "city"},
                               {"INFORM", "restaurant", "area"},
                               {"NOTIFY_SUCCESS", "restaurant", "none"}};
    std::sort(rec.begin(), rec.end());
    do {
        CHECK(select_mode(rec, table) == Mode::recommendation);
    } while (std::next_permutation(rec.begin(), rec.end()));
}

TEST_CASE("impressions require an eligible image") {
    Setup s;
    Personalizer p = s.make();
    CHECK(p.generate_impression(s.image) == kAdultImpression);

    align::PersonaImage group = s.image;
    group.metadata.single_person = false;
    CHECK_THROWS_AS(p.generate_impression(group), PreconditionError);
}

TEST_CASE("revise_user_turn restyles nonempty utterances only") {
    Setup s;
    Personalizer p = s.make();
    CHECK(p.revise_user_turn("", "find me a hotel", s.image.path) ==
          "[adult|formal|neutral] find me a hotel");
    CHECK_THROWS_AS(p.revise_user_turn("", "   ", s.image.path), PreconditionError);
}

TEST_CASE("stylize rewrites user turns and skips empty ones without a call") {
    Setup s;
    Personalizer p = s.make();

    Dialogue d;
    d.id = "A1";
    d.status = DialogueStatus::aligned;
    d.image_id = "persona";
    Turn t0;
    t0.index = 0;
    t0.user_utterance = "hello there";
    t0.system_utterance = "hi";
    Turn t1;
    t1.index = 1;
    t1.user_utterance = "";
    t1.system_utterance = "anything else?";
    d.turns = {t0, t1};

    uint64_t calls_before = s.gw.stats().provider_calls;
    Dialogue out = p.stylize_dialogue(d, s.image);
    CHECK(out.status == DialogueStatus::stylized);
    REQUIRE(out.turns[0].revised_user.has_value());
    CHECK(*out.turns[0].revised_user == "[adult|formal|neutral] hello there");
    REQUIRE(out.turns[1].revised_user.has_value());
    CHECK(out.turns[1].revised_user->empty());
    CHECK(s.gw.stats().provider_calls - calls_before == 1);
    CHECK_NOTHROW(out.validate());

    Dialogue raw = d;
    raw.status = DialogueStatus::raw;
    raw.image_id.reset();
    CHECK_THROWS_AS(p.stylize_dialogue(raw, s.image), PreconditionError);
}

TEST_CASE("personalize_system_turn renders per mode with retrieval fallback") {
    Setup s;
    Personalizer p = s.make();
    auto retrieved = s.store.retrieve_top_k("anything good?", "Blue Bistro", 2);
    REQUIRE(retrieved.size() == 2);

    std::string basic = p.personalize_system_turn("Here you go.", "user asked", s.image.path,
                                                  kAdultImpression, Mode::basic, {}, "");
    CHECK(basic == std::string("[styled-for: ") + kAdultImpression + "] Here you go.");

    std::string greeting = p.personalize_system_turn("Goodbye!", "user asked", s.image.path,
                                                     kAdultImpression, Mode::greeting, {}, "");
    CHECK(greeting == std::string("[greeting|") + kAdultImpression + "] Goodbye!");

    std::string rec =
        p.personalize_system_turn("Try Blue Bistro.", "user asked", s.image.path,
                                  kAdultImpression, Mode::recommendation, retrieved, "");
    CHECK(rec == std::string("[styled-for: ") + kAdultImpression + "] Try Blue Bistro. \"" +
                     retrieved[0].text + "\"");

    // Recommendation with nothing retrieved silently degrades to basic.
    std::string fallback =
        p.personalize_system_turn("Try Blue Bistro.", "user asked", s.image.path,
                                  kAdultImpression, Mode::recommendation, {}, "");
    CHECK(fallback == std::string("[styled-for: ") + kAdultImpression + "] Try Blue Bistro.");

    CHECK_THROWS_AS(p.personalize_system_turn("x", "y", s.image.path, "", Mode::basic, {}, ""),
                    PreconditionError);
}

TEST_CASE("personalize_dialogue grounds recommendations via the turn entity") {
    Setup s;
    Personalizer p = s.make();

    Dialogue d = stylized_dialogue({{"any good food nearby?", "Blue Bistro is nice."},
                                    {"book it please", "Done, enjoy!"}});
    d.turns[0].policy_acts = {{"OFFER", "restaurant", "restaurant_name"}};
    d.turns[0].db_results = std::map<std::string, std::string>{{"name", "Blue Bistro"}};
    d.turns[1].policy_acts = {{"BYE", "general", "none"}};

    Result r = p.personalize_dialogue(d, s.image);
    CHECK(r.dialogue.status == DialogueStatus::personalized);
    CHECK(r.dialogue.impression == kAdultImpression);
    CHECK_NOTHROW(r.dialogue.validate());
    REQUIRE(r.traces.size() == 2);

    CHECK(r.traces[0].turn_index == 0);
    CHECK(r.traces[0].requested_mode == Mode::recommendation);
    CHECK(r.traces[0].effective_mode == Mode::recommendation);
    CHECK(r.traces[0].retrieved_count == 2);
    auto expected = s.store.retrieve_top_k(*d.turns[0].revised_user, "Blue Bistro", 3);
    CHECK(*r.dialogue.turns[0].personalized_system ==
          std::string("[styled-for: ") + kAdultImpression + "] Blue Bistro is nice. \"" +
              expected[0].text + "\"");

    // Final turn greeting applies at the dialogue edge.
    CHECK(r.traces[1].requested_mode == Mode::greeting);
    CHECK(r.traces[1].effective_mode == Mode::greeting);
    CHECK(r.dialogue.turns[1].personalized_system->rfind("[greeting|", 0) == 0);
}

TEST_CASE("entity for retrieval walks back to the latest db name") {
    Setup s;
    Personalizer p = s.make();

    Dialogue d = stylized_dialogue({{"any good food?", "Blue Bistro is nice."},
                                    {"tell me more", "It has a patio."}});
    d.turns[0].db_results = std::map<std::string, std::string>{{"name", "Blue Bistro"}};
    d.turns[1].policy_acts = {{"RECOMMEND", "restaurant", "none"}};  // no db_results here

    Result r = p.personalize_dialogue(d, s.image);
    REQUIRE(r.traces.size() == 2);
    CHECK(r.traces[1].effective_mode == Mode::recommendation);
    CHECK(r.traces[1].retrieved_count == 2);
}

TEST_CASE("recommendation falls back to basic without an entity or matches") {
    Setup s;
    Personalizer p = s.make();

    SUBCASE("no db name anywhere") {
        Dialogue d = stylized_dialogue({{"hi", "There are many options."}});
        d.turns[0].policy_acts = {{"OFFER", "restaurant", "restaurant_name"}};
        Result r = p.personalize_dialogue(d, s.image);
        REQUIRE(r.traces.size() == 1);
        CHECK(r.traces[0].requested_mode == Mode::recommendation);
        CHECK(r.traces[0].effective_mode == Mode::basic);
        CHECK(r.traces[0].retrieved_count == 0);
        CHECK(r.dialogue.turns[0].personalized_system->find('"') == std::string::npos);
    }
    SUBCASE("entity unknown to the store") {
        Dialogue d = stylized_dialogue({{"hi", "Crimson Cafe it is."}});
        d.turns[0].policy_acts = {{"OFFER", "restaurant", "restaurant_name"}};
        d.turns[0].db_results = std::map<std::string, std::string>{{"name", "Crimson Cafe"}};
        Result r = p.personalize_dialogue(d, s.image);
        CHECK(r.traces[0].effective_mode == Mode::basic);
        CHECK(r.traces[0].retrieved_count == 0);
    }
}

TEST_CASE("mid-dialogue greetings re-dispatch to the remaining acts") {
    Setup s;
    Personalizer p = s.make();

    Dialogue d = stylized_dialogue({{"hi", "Welcome!"},
                                    {"thanks, got a tip?", "Sure, Blue Bistro."},
                                    {"bye", "Goodbye!"}});
    d.turns[0].policy_acts = {{"WELCOME", "general", "none"}};
    d.turns[1].policy_acts = {{"THANK", "general", "none"},
                              {"OFFER", "restaurant", "restaurant_name"}};
    d.turns[1].db_results = std::map<std::string, std::string>{{"name", "Blue Bistro"}};
    d.turns[2].policy_acts = {{"GOODBYE", "general", "none"}};

    Result r = p.personalize_dialogue(d, s.image);
    REQUIRE(r.traces.size() == 3);
    CHECK(r.traces[0].effective_mode == Mode::greeting);  // first turn keeps it
    CHECK(r.traces[1].requested_mode == Mode::greeting);
    CHECK(r.traces[1].effective_mode == Mode::recommendation);  // re-dispatched
    CHECK(r.traces[1].retrieved_count > 0);
    CHECK(r.traces[2].effective_mode == Mode::greeting);  // last turn keeps it

    // A lone mid-dialogue greeting act degrades to basic.
    Dialogue lone = stylized_dialogue({{"hi", "Welcome!"},
                                       {"thanks", "You are welcome."},
                                       {"bye", "Goodbye!"}});
    lone.turns[1].policy_acts = {{"THANK", "general", "none"}};
    Result r2 = p.personalize_dialogue(lone, s.image);
    CHECK(r2.traces[1].requested_mode == Mode::greeting);
    CHECK(r2.traces[1].effective_mode == Mode::basic);
}

TEST_CASE("empty system turns are passed through without a trace") {
    Setup s;
    Personalizer p = s.make();

    Dialogue d = stylized_dialogue({{"find a hotel", "Sure, any area?"}, {"thanks, bye", ""}});
    Result r = p.personalize_dialogue(d, s.image);
    REQUIRE(r.traces.size() == 1);
    CHECK(r.traces[0].turn_index == 0);
    REQUIRE(r.dialogue.turns[1].personalized_system.has_value());
    CHECK(r.dialogue.turns[1].personalized_system->empty());
    CHECK_NOTHROW(r.dialogue.validate());
}

TEST_CASE("personalize_dialogue requires a stylized input") {
    Setup s;
    Personalizer p = s.make();
    Dialogue d = stylized_dialogue({{"hi", "hello"}});
    d.status = DialogueStatus::aligned;
    for (auto& t : d.turns) t.revised_user.reset();
    CHECK_THROWS_AS(p.personalize_dialogue(d, s.image), PreconditionError);
}
