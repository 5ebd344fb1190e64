#pragma once

#include <string>

#include "espresso/session.hpp"

namespace espresso {

struct BenchReport {
  std::string protocol;
  std::uint64_t client_size = 0;
  std::uint64_t server_size = 0;
  std::uint32_t k = 0;

  /// Server-side precomputation of tags, done once per set.
  double offline_ms = 0;
  /// Wall-clock of the session itself, handshake to output.
  double online_ms = 0;
  double client_cpu_ms = 0;
  double server_cpu_ms = 0;

  /// Bytes on the wire in both directions, frame headers included.
  std::uint64_t bytes_transferred = 0;
  /// The part of bytes_transferred that is not round 1 or round 2 payload.
  std::uint64_t overhead_bytes = 0;

  /// Time of the plaintext computation of the same output.
  double plaintext_ms = 0;
  /// online_ms / plaintext_ms.
  double slowdown = 0;

  /// The private output agreed with the plaintext one.
  bool oracle_agrees = false;
  double result = 0;
};

struct BenchOptions {
  ProtocolId protocol = ProtocolId::kJaccardExact;
  std::uint64_t size = 1000;
  /// Fraction of the client's items also held by the server.
  double overlap = 0.5;
  std::uint32_t k = 400;
  GroupParams params = builtin_params();
};

/// One in-memory run of a set protocol on random sets of the given size.
/// Iris is not a set protocol and is rejected.
BenchReport run_bench(const BenchOptions& options, Rng& rng);

/// One JSON object, no trailing newline.
std::string to_json(const BenchReport& report);

/// Random distinct 16-byte items: a has size_a, b has size_b, and they
/// share exactly common items.
std::pair<std::vector<Bytes>, std::vector<Bytes>> random_set_pair(std::uint64_t size_a,
                                                                  std::uint64_t size_b,
                                                                  std::uint64_t common, Rng& rng);

}  // namespace espresso
