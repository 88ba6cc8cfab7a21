#include "gnr/annotate.hpp"

#include "gnr/parallel.hpp"

#include <json.hpp>

#include <fstream>

namespace gnr::llm {

ThemeAnnotation annotate_theme(const NewsArticle& article, Gateway& gateway) {
  const auto ex = gateway.complete(render_theme_prompt(article));
  return {article.id, parse_theme_response(ex.response)};
}

std::map<std::string, std::vector<std::string>> annotate_themes(const corpus::CorpusStore& store, Gateway& gateway) {
  const auto& articles = store.articles();
  std::vector<ThemeAnnotation> out(articles.size());
  parallel_for(articles.size(), gateway.config().max_parallel,
               [&](std::size_t i) { out[i] = annotate_theme(articles[i], gateway); });
  std::map<std::string, std::vector<std::string>> themes;
  for (auto& a : out) themes[a.news_id] = std::move(a.topics);
  return themes;
}

UserInterestProfile build_profile(const std::string& user_key, const std::vector<const NewsArticle*>& history,
                                  Gateway& gateway) {
  const auto ex = gateway.complete(render_profile_prompt(history));
  auto profile = parse_profile_response(ex.response);
  profile.user_key = user_key;
  return profile;
}

void write_profiles(const std::vector<UserInterestProfile>& profiles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : profiles) {
    nlohmann::json rec = {{"user_key", p.user_key},
                          {"categories", p.categories},
                          {"topics", p.topics},
                          {"supporting_ids", p.supporting_ids}};
    out << rec.dump() << '\n';
  }
}

std::vector<UserInterestProfile> read_profiles(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<UserInterestProfile> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      UserInterestProfile p;
      p.user_key = j.at("user_key").get<std::string>();
      p.categories = j.at("categories").get<std::vector<std::string>>();
      p.topics = j.at("topics").get<std::vector<std::string>>();
      p.supporting_ids = j.value("supporting_ids", std::vector<std::string>{});
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gnr::llm
