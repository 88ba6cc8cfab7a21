#include "gnr/fusion.hpp"

#include "gnr/parallel.hpp"

#include <json.hpp>

#include <fstream>

namespace gnr::fusion {

std::string to_string(GeneratorTag tag) {
  switch (tag) {
    case GeneratorTag::kExternalLlm:
      return "external-llm";
    case GeneratorTag::kStub:
      return "stub";
    case GeneratorTag::kLocalGenerator:
      return "local-generator";
  }
  return "stub";
}

GeneratorTag parse_generator_tag(const std::string& name) {
  if (name == "external-llm") return GeneratorTag::kExternalLlm;
  if (name == "stub") return GeneratorTag::kStub;
  if (name == "local-generator") return GeneratorTag::kLocalGenerator;
  throw DataError("unknown generator tag '" + name + "'");
}

llm::Prompt fusion_prompt(const explorer::ReferenceNewsSet& set, const llm::UserInterestProfile& profile,
                          const corpus::CorpusStore& store) {
  std::vector<const corpus::NewsArticle*> related;
  for (const auto& r : set.related) related.push_back(&store.at(r.id));
  return llm::render_fusion_prompt(store.at(set.focal), related, profile);
}

Narrative fuse_narrative(const explorer::ReferenceNewsSet& set, const llm::UserInterestProfile& profile,
                         const corpus::CorpusStore& store, llm::Gateway& gateway) {
  const auto prompt = fusion_prompt(set, profile, store);
  std::vector<std::string> raw;
  llm::NarrativeDraft draft;
  llm::ChatExchange ex = gateway.complete(prompt);
  raw.push_back(ex.response);
  try {
    draft = llm::parse_narrative_response(ex.response);
  } catch (const ParseError&) {
    llm::Prompt retry = prompt;
    retry.user += "\n" + std::string(llm::kFormatReminder);
    ex = gateway.complete(retry);
    raw.push_back(ex.response);
    try {
      draft = llm::parse_narrative_response(ex.response);
    } catch (const ParseError& e) {
      throw FusionError("narrative for " + set.impression_id + " unparseable after a re-ask: " + e.what(), raw);
    }
  }
  Narrative n;
  n.impression_id = set.impression_id;
  n.title = draft.title;
  n.category = draft.category.empty() ? store.at(set.focal).category : draft.category;
  n.topics = draft.topics;
  n.abstract = draft.abstract;
  n.source_ids = set.ids();
  n.generator = ex.provider == "stub" ? GeneratorTag::kStub : GeneratorTag::kExternalLlm;
  n.prompt_hash = prompt.hash();
  check_provenance(n, set);
  return n;
}

std::vector<Narrative> fuse_all(const std::vector<FusionJob>& jobs, const corpus::CorpusStore& store,
                                llm::Gateway& gateway) {
  std::vector<Narrative> out(jobs.size());
  parallel_for(jobs.size(), gateway.config().max_parallel,
               [&](std::size_t i) { out[i] = fuse_narrative(*jobs[i].set, *jobs[i].profile, store, gateway); });
  return out;
}

void check_provenance(const Narrative& narrative, const explorer::ReferenceNewsSet& set) {
  if (narrative.source_ids != set.ids()) {
    throw Error("narrative " + narrative.impression_id + " sources differ from its reference set");
  }
  if (narrative.title.empty() || narrative.abstract.empty()) {
    throw Error("narrative " + narrative.impression_id + " has an empty title or abstract");
  }
}

void write_narratives(const std::vector<Narrative>& narratives, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& n : narratives) {
    nlohmann::json rec = {{"impression_id", n.impression_id}, {"title", n.title},
                          {"category", n.category},           {"topics", n.topics},
                          {"abstract", n.abstract},           {"source_ids", n.source_ids},
                          {"generator", to_string(n.generator)}, {"prompt_hash", n.prompt_hash}};
    out << rec.dump() << '\n';
  }
}

std::vector<Narrative> read_narratives(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Narrative> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Narrative n;
      n.impression_id = j.at("impression_id").get<std::string>();
      n.title = j.at("title").get<std::string>();
      n.category = j.at("category").get<std::string>();
      n.topics = j.at("topics").get<std::vector<std::string>>();
      n.abstract = j.at("abstract").get<std::string>();
      n.source_ids = j.at("source_ids").get<std::vector<std::string>>();
      n.generator = parse_generator_tag(j.at("generator").get<std::string>());
      n.prompt_hash = j.at("prompt_hash").get<std::string>();
      out.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

corpus::NewsArticle as_article(const Narrative& narrative, const std::string& id) {
  corpus::NewsArticle a;
  a.id = id;
  a.category = narrative.category;
  a.title = narrative.title;
  a.abstract = narrative.abstract;
  if (!narrative.topics.empty()) {
    std::vector<std::string> topics;
    for (const auto& t : narrative.topics) {
      if (topics.size() == corpus::kMaxThemeTopics) break;
      topics.push_back(t);
    }
    a.theme_topics = topics;
  }
  return a;
}

}  // namespace gnr::fusion
