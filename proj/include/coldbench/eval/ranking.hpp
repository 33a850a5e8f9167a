#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coldbench::eval {

/// An ordered list of one task's candidates, best first.
struct Ranking {
  std::string user_id;
  std::vector<std::string> item_ids;
  std::string method;
  std::uint64_t seed = 0;

  bool operator==(const Ranking&) const = default;
};

/// Sorts candidates by descending score, ties by ascending item id.
/// scores[i] belongs to candidate_ids[i].
std::vector<std::string> order_by_score(const std::vector<std::string>& candidate_ids,
                                        const std::vector<double>& scores);

}  // namespace coldbench::eval
