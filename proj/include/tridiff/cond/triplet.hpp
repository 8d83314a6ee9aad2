#pragma once

#include <array>
#include <fstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace tridiff {

// Annotation schema vocabulary sizes.
constexpr int kNumInstruments = 6;
constexpr int kNumVerbs = 10;
constexpr int kNumTargets = 15;
constexpr int kNumPhases = 7;

/// Sentinel for an undefined annotation element; a triplet containing it is
/// treated as no annotation at all by the preprocessing rules.
constexpr int kUndefinedId = -1;

/// (instrument, verb, target) id triple; the conditioning signal.
struct ActionTriplet {
    int instrument_id = 0;
    int verb_id = 0;
    int target_id = 0;

    bool operator==(const ActionTriplet&) const = default;
    auto operator<=>(const ActionTriplet& o) const {
        return std::tie(instrument_id, verb_id, target_id) <=>
               std::tie(o.instrument_id, o.verb_id, o.target_id);
    }

    bool defined() const {
        return instrument_id >= 0 && instrument_id < kNumInstruments && verb_id >= 0 &&
               verb_id < kNumVerbs && target_id >= 0 && target_id < kNumTargets;
    }
    void validate() const {
        if (!defined())
            throw std::out_of_range("triplet (" + std::to_string(instrument_id) + "," +
                                    std::to_string(verb_id) + "," + std::to_string(target_id) +
                                    ") outside vocabulary");
    }
    std::array<int, 3> ids() const { return {instrument_id, verb_id, target_id}; }
};

/// Per-frame annotation: up to 3 triplets (possibly with undefined elements)
/// plus the phase label.
struct FrameAnnotation {
    std::vector<ActionTriplet> triplets;  // raw; may contain kUndefinedId entries
    int phase_id = 0;

    void validate() const {
        if (triplets.size() > 3)
            throw std::invalid_argument("a frame carries at most 3 triplets");
        if (phase_id < 0 || phase_id >= kNumPhases)
            throw std::out_of_range("phase id " + std::to_string(phase_id) + " outside [0,7)");
    }

    /// Triplets with all three elements defined.
    std::vector<ActionTriplet> defined_triplets() const {
        std::vector<ActionTriplet> out;
        for (const auto& t : triplets)
            if (t.defined()) out.push_back(t);
        return out;
    }
};

/// id -> word tables for rendering triplets as text. The words describe the
/// synthetic dataset's sprites and motions.
struct Lexicon {
    std::vector<std::string> instruments;
    std::vector<std::string> verbs;
    std::vector<std::string> targets;

    static Lexicon defaults() {
        Lexicon lex;
        lex.instruments = {"probe", "grasper", "scissors", "hook", "needle", "clamp"};
        lex.verbs = {"approach", "oscillate", "retract", "circle",   "sweep",
                     "lift",     "press",     "drag",    "release", "idle"};
        lex.targets = {"amber", "azure",  "coral", "crimson", "emerald",
                       "gold",  "indigo", "ivory", "jade",    "lilac",
                       "maroon", "olive", "pearl", "teal",    "violet"};
        return lex;
    }

    void validate() const {
        if (instruments.size() != kNumInstruments || verbs.size() != kNumVerbs ||
            targets.size() != kNumTargets)
            throw std::invalid_argument("lexicon must cover the full id vocabulary");
    }

    const std::string& instrument_word(int id) const { return word(instruments, id, "instrument"); }
    const std::string& verb_word(int id) const { return word(verbs, id, "verb"); }
    const std::string& target_word(int id) const { return word(targets, id, "target"); }

    std::string render(const ActionTriplet& t) const {
        t.validate();
        return instrument_word(t.instrument_id) + " " + verb_word(t.verb_id) + " " +
               target_word(t.target_id);
    }

    /// Flat word index across the three categories, for embedding tables.
    int word_index(const ActionTriplet& t, int position) const {
        t.validate();
        switch (position) {
            case 0: return t.instrument_id;
            case 1: return kNumInstruments + t.verb_id;
            case 2: return kNumInstruments + kNumVerbs + t.target_id;
            default: throw std::out_of_range("triplet position must be 0..2");
        }
    }
    static constexpr int vocab_size() { return kNumInstruments + kNumVerbs + kNumTargets; }

    nlohmann::json to_json() const {
        return {{"instruments", instruments}, {"verbs", verbs}, {"targets", targets}};
    }
    static Lexicon from_json(const nlohmann::json& j) {
        Lexicon lex;
        lex.instruments = j.at("instruments").get<std::vector<std::string>>();
        lex.verbs = j.at("verbs").get<std::vector<std::string>>();
        lex.targets = j.at("targets").get<std::vector<std::string>>();
        lex.validate();
        return lex;
    }
    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write lexicon: " + path);
        os << to_json().dump(2) << "\n";
    }
    static Lexicon load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open lexicon: " + path);
        nlohmann::json j;
        is >> j;
        return from_json(j);
    }

private:
    static const std::string& word(const std::vector<std::string>& table, int id,
                                   const char* what) {
        if (id < 0 || static_cast<size_t>(id) >= table.size())
            throw std::out_of_range(std::string("missing lexicon entry for ") + what + " id " +
                                    std::to_string(id));
        return table[static_cast<size_t>(id)];
    }
};

}  // namespace tridiff
