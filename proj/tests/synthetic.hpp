#pragma once

// Synthetic task builders shared by the unit tests and the acceptance suite.

#include "gnr/corpus.hpp"
#include "gnr/rng.hpp"
#include "gnr/uift.hpp"

#include <string>
#include <vector>

namespace gnr::testing {

inline std::string word(const std::string& stem, std::size_t i) { return stem + std::to_string(i); }

inline std::string random_words(Rng& rng, const std::string& stem, std::size_t pool, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += word(stem, rng.below(pool));
  }
  return out;
}

// Clicks follow a latent theme that appears only in the theme sidecar; titles
// and abstracts are drawn from one theme-independent word pool.
struct ThemeTask {
  corpus::CorpusStore store;
  std::vector<corpus::Impression> train;
  std::vector<corpus::Impression> test;
};

inline ThemeTask make_theme_task(std::uint64_t seed, std::size_t themes = 6, std::size_t per_theme = 30,
                                 std::size_t train_users = 160, std::size_t test_users = 80) {
  Rng rng(seed);
  ThemeTask task;
  // Articles are split into train and test halves so held-out candidates are unseen.
  std::vector<std::vector<std::string>> train_ids(themes), test_ids(themes);
  std::size_t n = 0;
  for (std::size_t t = 0; t < themes; ++t) {
    for (std::size_t i = 0; i < per_theme; ++i) {
      corpus::NewsArticle a;
      a.id = "S" + std::to_string(n++);
      a.category = "politics";
      a.title = random_words(rng, "w", 60, 6);
      a.abstract = random_words(rng, "w", 60, 10);
      a.theme_topics = std::vector<std::string>{"theme" + std::to_string(t), random_words(rng, "x", 30, 2)};
      (i % 2 == 0 ? train_ids : test_ids)[t].push_back(a.id);
      task.store.add(std::move(a));
    }
  }
  auto make_users = [&](std::size_t count, const std::vector<std::vector<std::string>>& pool,
                        std::vector<corpus::Impression>& out, const std::string& prefix) {
    for (std::size_t u = 0; u < count; ++u) {
      const std::size_t liked = rng.below(themes);
      corpus::Impression imp;
      imp.impression_id = prefix + std::to_string(u);
      imp.user_id = imp.impression_id;
      imp.timestamp = "0";
      // History always comes from the training half.
      for (std::size_t h = 0; h < 6; ++h) {
        imp.history.push_back(train_ids[liked][rng.below(train_ids[liked].size())]);
      }
      imp.candidates.push_back({pool[liked][rng.below(pool[liked].size())], true});
      for (std::size_t k = 0; k < 4; ++k) {
        std::size_t other = rng.below(themes - 1);
        if (other >= liked) ++other;
        imp.candidates.push_back({pool[other][rng.below(pool[other].size())], false});
      }
      rng.shuffle(imp.candidates);
      out.push_back(std::move(imp));
    }
  };
  make_users(train_users, train_ids, task.train, "train");
  make_users(test_users, test_ids, task.test, "test");
  return task;
}

// SFT gold sequences use a shared vocabulary; rank-1 texts use a distinctive
// one, so an SFT-only generator prefers the worst-ranked text.
struct UiftTask {
  std::vector<uift::SftExample> sft;
  std::vector<uift::NarrativeTriple> train;
  std::vector<uift::NarrativeTriple> heldout;
  std::vector<std::string> texts;  // everything the vocabulary must cover
};

inline UiftTask make_uift_task(std::uint64_t seed, std::size_t n_train = 50, std::size_t n_heldout = 50) {
  Rng rng(seed);
  UiftTask task;
  auto triple = [&] {
    uift::NarrativeTriple t;
    t.condition = random_words(rng, "c", 20, 5);
    const std::string best = random_words(rng, "d", 20, 8);
    const std::string mid = random_words(rng, "d", 20, 4) + " " + random_words(rng, "s", 20, 4);
    const std::string worst = random_words(rng, "s", 20, 8);
    // Which role holds which rank varies from triple to triple.
    std::vector<int> perm{1, 2, 3};
    rng.shuffle(perm);
    const std::array<std::string, 3> by_rank{best, mid, worst};
    for (std::size_t r = 0; r < 3; ++r) {
      t.texts[r] = by_rank[static_cast<std::size_t>(perm[r] - 1)];
      t.ranks[r] = perm[r];
    }
    t.has_ranks = true;
    return t;
  };
  for (std::size_t i = 0; i < 60; ++i) {
    task.sft.push_back({random_words(rng, "c", 20, 5), random_words(rng, "s", 20, 8)});
  }
  for (std::size_t i = 0; i < n_train; ++i) task.train.push_back(triple());
  for (std::size_t i = 0; i < n_heldout; ++i) task.heldout.push_back(triple());
  for (std::size_t i = 0; i < 20; ++i) {
    task.texts.push_back(word("c", i) + " " + word("d", i) + " " + word("s", i));
  }
  return task;
}

}  // namespace gnr::testing
