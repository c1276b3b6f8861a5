#pragma once

#include <set>

#include "luckchain/node.hpp"
#include "luckchain/scenario.hpp"

namespace luckchain {

// Routing-level realization of one AdversarySpec. The simulator consults it
// on every point-to-point delivery and after every chain adoption; the
// controller never sees or mutates message contents beyond the sender label.
class AdversaryController {
 public:
  explicit AdversaryController(const AdversarySpec& spec);

  const AdversarySpec& spec() const { return spec_; }
  bool controls(int id) const { return controlled_.count(id) != 0; }

  // Drop decision for a delivery; evaluated at send and again at delivery so
  // reveals and activations in between take effect.
  bool blocks(int from, int to, const Message& msg) const;

  // Sender relabeling for outgoing messages of controlled nodes.
  std::optional<int> relabel(int from) const;

  // Height observations after any adoption. honest_best/controlled_best are
  // the luckiest chain lengths on each side. Returns true exactly once, when
  // the reveal should fire.
  bool observe(std::uint64_t honest_best, std::uint64_t controlled_best);

  void mark_revealed(std::int64_t now_ms);
  bool active() const { return active_; }
  bool revealed() const { return revealed_; }
  std::int64_t reveal_ms() const { return reveal_ms_; }
  std::uint64_t branch_height() const { return branch_height_; }

 private:
  AdversarySpec spec_;
  std::set<int> controlled_;
  bool active_ = false;      // isolation in force (minority_fork)
  bool revealed_ = false;
  std::uint64_t branch_height_ = 0;
  std::int64_t reveal_ms_ = -1;
};

}  // namespace luckchain
