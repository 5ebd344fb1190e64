#pragma once

#include <optional>
#include <vector>

#include "espresso/apps_iris.hpp"
#include "espresso/similarity.hpp"
#include "espresso/wire.hpp"

namespace espresso {

enum class Role { kClient, kServer };

struct SessionInputs {
  /// Set protocols: the party's items.
  std::vector<Bytes> items;
  /// Iris: the party's code.
  std::optional<IrisCode> iris;
  /// Media: sketched instead of exact.
  bool approximate = false;
};

struct SessionConfig {
  ProtocolOptions options;
  IrisOptions iris;
};

struct SessionOutput {
  ProtocolId protocol = ProtocolId::kPsiCa;
  Role role = Role::kClient;

  std::optional<std::uint64_t> cardinality;
  std::optional<SimilarityResult> similarity;
  std::optional<CardinalityEstimate> approx;
  std::optional<IrisMatch> iris;

  std::optional<ServerOutcome> served;
  std::optional<IrisServerOutcome> served_iris;

  TranscriptStats stats;
  Digest transcript{};
};

/// Drives one protocol run to completion over transport. A server refuses
/// a hello for any other protocol. Local failures are sent to the peer as
/// an abort frame before being rethrown.
SessionOutput run_session(Role role, ProtocolId protocol, const SessionInputs& inputs,
                          const SessionConfig& config, Transport& transport, Rng& rng);

struct SessionPair {
  SessionOutput client;
  SessionOutput server;
};

/// Runs both roles, the server on its own thread, over two connected
/// transports. Per-role randomness is forked from rng. Rethrows the
/// client's failure first, then the server's.
SessionPair run_two_party(ProtocolId protocol, const SessionInputs& client_inputs,
                          const SessionInputs& server_inputs, const SessionConfig& config,
                          Transport& client_transport, Transport& server_transport, Rng& rng);

/// run_two_party over a fresh in-memory transport pair.
SessionPair run_loopback(ProtocolId protocol, const SessionInputs& client_inputs,
                         const SessionInputs& server_inputs, const SessionConfig& config, Rng& rng);

}  // namespace espresso
