#pragma once

#include "gnr/explorer.hpp"
#include "gnr/gateway.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gnr::fusion {

enum class GeneratorTag { kExternalLlm, kStub, kLocalGenerator };

std::string to_string(GeneratorTag tag);
GeneratorTag parse_generator_tag(const std::string& name);

struct Narrative {
  std::string impression_id;
  std::string title;
  std::string category;
  std::vector<std::string> topics;
  std::string abstract;
  std::vector<std::string> source_ids;  // focal first
  GeneratorTag generator = GeneratorTag::kStub;
  std::string prompt_hash;

  bool operator==(const Narrative&) const = default;
};

// Two unparseable responses in a row; both raw responses are kept.
class FusionError : public ProviderError {
 public:
  FusionError(const std::string& what, std::vector<std::string> raw)
      : ProviderError(what), raw_responses(std::move(raw)) {}
  std::vector<std::string> raw_responses;
};

llm::Prompt fusion_prompt(const explorer::ReferenceNewsSet& set, const llm::UserInterestProfile& profile,
                          const corpus::CorpusStore& store);

// Render, complete, parse; one re-ask with a format reminder on a parse failure.
Narrative fuse_narrative(const explorer::ReferenceNewsSet& set, const llm::UserInterestProfile& profile,
                         const corpus::CorpusStore& store, llm::Gateway& gateway);

struct FusionJob {
  const explorer::ReferenceNewsSet* set = nullptr;
  const llm::UserInterestProfile* profile = nullptr;
};

// Results in job order; runs up to the gateway's max_parallel jobs at once.
std::vector<Narrative> fuse_all(const std::vector<FusionJob>& jobs, const corpus::CorpusStore& store,
                                llm::Gateway& gateway);

// Throws Error unless the sources equal the set ids (focal first) and title/abstract are non-empty.
void check_provenance(const Narrative& narrative, const explorer::ReferenceNewsSet& set);

void write_narratives(const std::vector<Narrative>& narratives, const std::filesystem::path& path);
std::vector<Narrative> read_narratives(const std::filesystem::path& path);

// Narrative as an article for scoring: title, abstract, category and topics carried over.
corpus::NewsArticle as_article(const Narrative& narrative, const std::string& id);

}  // namespace gnr::fusion
