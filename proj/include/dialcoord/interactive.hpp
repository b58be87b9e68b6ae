#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/corpus.hpp"
#include "dialcoord/pipeline.hpp"

namespace dialcoord {

inline constexpr int kMaxSessionRounds = 10;
inline constexpr double kRepetitionThreshold = 0.9;

enum class TerminationReason { repetition, max_rounds };
std::string_view to_string(TerminationReason reason);

struct SessionTranscript {
    Task task = Task::esc;
    std::string system_name;
    std::string problem_summary;
    DialogueHistory history;
    std::vector<TurnTrace> traces;  // one per system turn when the system records traces
    std::optional<TerminationReason> termination;
    bool aborted = false;
    std::string error;

    int rounds() const;  // completed system turns
};

nlohmann::json to_json(const SessionTranscript& transcript);
SessionTranscript session_transcript_from_json(const nlohmann::json& doc);

// Repetition when either speaker's last two utterances have normalized edit
// similarity >= threshold; otherwise max_rounds once max_rounds system turns
// exist; otherwise nothing.
std::optional<TerminationReason> should_terminate(const DialogueHistory& history, int max_rounds = kMaxSessionRounds,
                                                  double threshold = kRepetitionThreshold);

// Seeker persona turn from the "seeker" template; "Seeker:" is stripped.
Utterance simulate_seeker(const TaskProfile& profile, const std::string& problem_summary,
                          const DialogueHistory& history, Gateway& gateway, double temperature = 0.7);

struct SystemReply {
    std::string text;
    std::optional<TurnTrace> trace;
};

using SystemFn = std::function<SystemReply(const DialogueHistory&)>;
using SeekerFn = std::function<std::string(const DialogueHistory&)>;

SystemFn make_engine_system(const Engine& engine);
SeekerFn make_llm_seeker(const TaskProfile& profile, std::string problem_summary, std::shared_ptr<Gateway> gateway);

// Seeker opens, then system and seeker alternate until should_terminate.
// A failure on either side returns the partial transcript marked aborted.
SessionTranscript run_interactive_session(const SystemFn& system, const SeekerFn& seeker, Task task,
                                          const std::string& problem_summary,
                                          int max_rounds = kMaxSessionRounds);

enum class BaselineKind { gpt35, gpt35_cot, mixinit };
BaselineKind parse_baseline(std::string_view name);  // throws "unknown_baseline"

struct BaselineContext {
    std::string problem;
    std::string emotion_type = "anxiety";
    std::string problem_type = "job crisis";
};

Utterance run_baseline(BaselineKind kind, const TaskProfile& profile, const DialogueHistory& history,
                       Gateway& gateway, const BaselineContext& context = {}, double temperature = 0.7);

// Text between "[Response]" and "[end]" (or the end). nullopt when absent.
std::optional<std::string> extract_cot_response(std::string_view completion);
// Drops a leading speaker label and "[Strategy: ...]" tag.
std::string strip_mixinit_tag(std::string_view completion);

SystemFn make_baseline_system(BaselineKind kind, const TaskProfile& profile, std::shared_ptr<Gateway> gateway,
                              BaselineContext context = {});

// Per-round share of each prioritized aspect.
struct AspectDistribution {
    int aspect_count = 3;
    // round -> proportions indexed by aspect_id - 1; rounds with no observations are absent.
    std::map<int, Vec> rows;

    nlohmann::json to_json(const std::vector<std::string>& aspect_names = {}) const;
};

inline constexpr int kDistributionRounds = 12;

// observations: (round, aspect_id) pairs.
AspectDistribution aspect_distribution(const std::vector<std::pair<int, int>>& observations, int aspect_count,
                                       int max_round = kDistributionRounds);
// Rank-1 aspect of each recorded system turn.
AspectDistribution aspect_distribution(const std::vector<SessionTranscript>& transcripts, int aspect_count,
                                       int max_round = kDistributionRounds);
// Strategy-mapped aspects of every system turn in the corpus.
AspectDistribution aspect_distribution(const Corpus& corpus, const StrategyMap& strategies, int aspect_count,
                                       int max_round = kDistributionRounds);

}  // namespace dialcoord
