#pragma once

// Steering fixture: a toy LM whose next-token distribution depends only on
// which system prompt precedes the query, plus two conflicting lexical rewards.
//
// Content tokens are "word", "please" and "um". The "verbose" reward pays for "word" and
// length; "terse-polite" pays for "please" and penalizes length. Both penalize "um", which
// every prompt likes, so decoding that contrasts prompts beats decoding that only mixes them.

#include <filesystem>

#include "prefsteer/backend.hpp"
#include "prefsteer/config.hpp"
#include "prefsteer/prompt_forge.hpp"
#include "prefsteer/reward.hpp"

namespace prefsteer::fixtures {

inline constexpr int kSteeringMaxTokens = 8;

Vocabulary steering_vocab();
ToyLmTable steering_table();
LexicalRewardSpec verbose_reward();
LexicalRewardSpec terse_polite_reward();
PromptLibrary steering_prompts();
/// Paths are relative to the fixture directory.
RunConfig steering_config();

/// Writes toy_lm.json, reward_verbose.json, reward_terse_polite.json, prompts.json and
/// config.json into `dir` (created if needed). Returns the config path.
std::filesystem::path write_steering_fixture(const std::filesystem::path& dir);

}  // namespace prefsteer::fixtures
