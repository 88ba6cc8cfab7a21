#pragma once

#include "gnr/corpus.hpp"
#include "gnr/gateway.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gnr::llm {

struct ThemeAnnotation {
  std::string news_id;
  std::vector<std::string> topics;
};

ThemeAnnotation annotate_theme(const NewsArticle& article, Gateway& gateway);
// Every article of the store, fanned out up to the gateway's parallelism.
std::map<std::string, std::vector<std::string>> annotate_themes(const corpus::CorpusStore& store, Gateway& gateway);

UserInterestProfile build_profile(const std::string& user_key, const std::vector<const NewsArticle*>& history,
                                  Gateway& gateway);

// One JSON record per line: user_key, categories, topics, supporting_ids.
void write_profiles(const std::vector<UserInterestProfile>& profiles, const std::filesystem::path& path);
std::vector<UserInterestProfile> read_profiles(const std::filesystem::path& path);

}  // namespace gnr::llm
