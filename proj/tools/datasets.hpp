#pragma once

#include <optional>
#include <string>
#include <vector>

namespace regemb::cli {

/// Benchmark corpora shapes and the published parameter totals used by
/// count-params to flag MATCH/MISMATCH.
struct KnownDataset {
  const char* name;
  long long vocab_size;
  int classes;
  long long are_total;  // h=256, region 9
  long long lre_total;  // h=128, region 7
  long long lcu_only;
};

inline constexpr long long kAcuOnlyReference = 5315328;  // h=256, region 9

inline const std::vector<KnownDataset>& known_datasets() {
  static const std::vector<KnownDataset> table = {
      {"ag", 42783, 4, 16268804, 43810308, 38333568},
      {"sogou", 99394, 5, 30761477, 101780101, 89057024},
      {"dbpedia", 227863, 14, 63651854, 233333518, 204165248},
      {"yelp_p", 115298, 2, 34832130, 118065410, 103307008},
      {"yelp_f", 124273, 5, 37130501, 127256197, 111348608},
      {"yahoo", 361926, 10, 97970954, 370613514, 324285696},
      {"amazon_p", 394385, 2, 106278402, 403850498, 353368960},
      {"amazon_f", 356312, 5, 96532485, 364864133, 319255552},
  };
  return table;
}

inline std::optional<KnownDataset> find_dataset(const std::string& name) {
  for (const KnownDataset& d : known_datasets()) {
    if (name == d.name) return d;
  }
  return std::nullopt;
}

}  // namespace regemb::cli
