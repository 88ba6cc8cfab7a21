#pragma once

#include "gnr/corpus.hpp"

#include <string>
#include <vector>

namespace gnr::llm {

using corpus::NewsArticle;

// A chat prompt: the instruction block is the system message, the input the user message.
struct Prompt {
  std::string system;
  std::string user;

  // sha256 of system, a NUL byte, then user.
  std::string hash() const;
  bool operator==(const Prompt&) const = default;
};

extern const char* const kThemeInstruction;
extern const char* const kProfileInstruction;
extern const char* const kFusionInstruction;
extern const char* const kJudgeInstruction;
extern const char* const kJudgeVersion;
extern const char* const kFormatReminder;

struct UserInterestProfile {
  std::string user_key;
  std::vector<std::string> categories;
  std::vector<std::string> topics;
  std::vector<std::string> supporting_ids;

  bool empty() const { return categories.empty() && topics.empty(); }
  bool operator==(const UserInterestProfile&) const = default;
};

struct NarrativeDraft {
  std::string title;
  std::string category;
  std::vector<std::string> topics;
  std::string abstract;
  std::string raw;
};

// `{"k": "v", ...}` with JSON string escaping, keys in the given order.
std::string render_record(const std::vector<std::pair<std::string, std::string>>& fields);

Prompt render_theme_prompt(const NewsArticle& article);
// Throws DataError when the history is empty or an article lacks theme topics.
Prompt render_profile_prompt(const std::vector<const NewsArticle*>& history);
// "This user is interested in news about [c1, c2], especially [t1, t2]."
std::string interest_sentence(const UserInterestProfile& profile);
Prompt render_fusion_prompt(const NewsArticle& focal, const std::vector<const NewsArticle*>& related,
                            const UserInterestProfile& profile);
Prompt render_judge_prompt(const std::vector<const NewsArticle*>& sources, const std::string& title,
                           const std::string& abstract);

std::vector<std::string> parse_theme_response(const std::string& text);
UserInterestProfile parse_profile_response(const std::string& text);
NarrativeDraft parse_narrative_response(const std::string& text);
// "yes"/"no" at the start of the answer, case-insensitive.
bool parse_judge_response(const std::string& text);

// Every sentence of `narrative` overlaps some source sentence with word
// Jaccard >= threshold. Vacuously true for a narrative without words.
bool extractive_consistent(const std::vector<std::string>& source_texts, const std::string& narrative,
                           double threshold = 0.5);

}  // namespace gnr::llm
