#pragma once

#include <stdexcept>
#include <string>

namespace luckchain {

enum class Err {
  NoRound,               // mine attempted before any round was bound
  BadLink,               // header.parent does not hash-link previous block
  WrongParent,           // previous block is not a sibling of the round block
  TooEarly,              // round/duration wait has not elapsed
  ConcurrentInvocation,  // monotonic counter moved mid-wait
  InsufficientProofs,    // fewer distinct-pseudonym candidates than m
  NotCompromised,        // forgery requested on an uncompromised CPU
  DuplicateCpu,          // registry already holds this cpu id
  UnknownCpu,            // revocation of an unregistered cpu id
  ConfigError,           // scenario/config rejected before execution
  Internal               // invariant violation; a bug, not an input error
};

const char* err_name(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err kind, const std::string& msg)
      : std::runtime_error(std::string(err_name(kind)) + ": " + msg),
        kind_(kind) {}

  Err kind() const { return kind_; }

 private:
  Err kind_;
};

[[noreturn]] inline void raise(Err kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace luckchain
