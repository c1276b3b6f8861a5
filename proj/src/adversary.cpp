#include "luckchain/adversary.hpp"

namespace luckchain {

AdversaryController::AdversaryController(const AdversarySpec& spec)
    : spec_(spec), controlled_(spec.controlled.begin(), spec.controlled.end()) {
  // A fork branching at height 0 isolates from the first round on.
  if (spec_.kind == AdversarySpec::Kind::minority_fork &&
      spec_.fork_height == 0) {
    active_ = true;
  }
}

bool AdversaryController::blocks(int from, int to, const Message& msg) const {
  if (revealed_) return false;
  if (!msg.is_chain_kind() && msg.kind != Message::Kind::candidate) {
    return false;  // transactions keep flowing
  }
  switch (spec_.kind) {
    case AdversarySpec::Kind::minority_fork:
      // Full fork secrecy: the group neither leaks its chain nor follows the
      // honest one while the fork is being built.
      return active_ && controls(from) != controls(to);
    case AdversarySpec::Kind::withhold_reveal:
      // One-way: withheld own wins, honest chains still adopted.
      return controls(from) && !controls(to);
    case AdversarySpec::Kind::spoofer:
    case AdversarySpec::Kind::compromised_tee:
      return false;
  }
  return false;
}

std::optional<int> AdversaryController::relabel(int from) const {
  if (spec_.kind != AdversarySpec::Kind::spoofer || !controls(from)) {
    return std::nullopt;
  }
  return spec_.spoof_as;
}

bool AdversaryController::observe(std::uint64_t honest_best,
                                  std::uint64_t controlled_best) {
  if (revealed_) return false;
  switch (spec_.kind) {
    case AdversarySpec::Kind::minority_fork: {
      if (!active_) {
        if (controlled_best < static_cast<std::uint64_t>(spec_.fork_height)) {
          return false;
        }
        active_ = true;
        branch_height_ = controlled_best;
      }
      std::uint64_t goal = branch_height_ + spec_.reveal_height;
      return honest_best >= goal && controlled_best >= goal;
    }
    case AdversarySpec::Kind::withhold_reveal:
      return controlled_best >= static_cast<std::uint64_t>(spec_.reveal_height);
    case AdversarySpec::Kind::spoofer:
    case AdversarySpec::Kind::compromised_tee:
      return false;
  }
  return false;
}

void AdversaryController::mark_revealed(std::int64_t now_ms) {
  revealed_ = true;
  reveal_ms_ = now_ms;
}

}  // namespace luckchain
