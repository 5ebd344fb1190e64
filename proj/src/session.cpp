#include "espresso/session.hpp"

#include <exception>
#include <thread>

namespace espresso {

namespace {

const IrisCode& need_iris(const SessionInputs& inputs) {
  if (!inputs.iris) fail(ErrorCode::kInvalidArgument, "iris protocol needs an iris code");
  return *inputs.iris;
}

void run_client(Channel& ch, ProtocolId protocol, const SessionInputs& inputs,
                const SessionConfig& config, Rng& rng, SessionOutput& out) {
  const auto& opts = config.options;
  switch (protocol) {
    case ProtocolId::kPsiCa:
      out.cardinality = psi_ca_client(ch, inputs.items, opts, rng);
      break;
    case ProtocolId::kJaccardExact:
      out.similarity = jaccard_exact_client(ch, inputs.items, opts, rng);
      break;
    case ProtocolId::kJaccardMinhash:
      out.similarity = jaccard_minhash_client(ch, inputs.items, opts, rng);
      break;
    case ProtocolId::kApproxCard:
      out.approx = approx_cardinality_client(ch, inputs.items, opts, rng);
      break;
    case ProtocolId::kMedia:
      out.similarity = media_client(ch, inputs.items, inputs.approximate, opts, rng);
      break;
    case ProtocolId::kIris:
      out.iris = iris_client(ch, need_iris(inputs), config.iris, opts, rng);
      break;
  }
}

void run_server(Channel& ch, ProtocolId protocol, const SessionInputs& inputs,
                const SessionConfig& config, Rng& rng, SessionOutput& out) {
  auto hello = receive_hello(ch);
  if (hello.protocol != protocol) {
    Error e(ErrorCode::kHandshakeMismatch, "server runs " + std::string(protocol_name(protocol)) +
                                               ", client asked for " +
                                               std::string(protocol_name(hello.protocol)));
    ch.send_abort(e);
    throw e;
  }
  if (protocol == ProtocolId::kIris) {
    out.served_iris = serve_iris(ch, hello, need_iris(inputs), config.iris, config.options, rng);
  } else {
    auto opts = config.options;
    if (protocol == ProtocolId::kMedia && !inputs.approximate) opts.k = 0;
    out.served = serve_set_protocol(ch, hello, inputs.items, opts, rng);
  }
}

}  // namespace

SessionOutput run_session(Role role, ProtocolId protocol, const SessionInputs& inputs,
                          const SessionConfig& config, Transport& transport, Rng& rng) {
  Channel ch(transport, config.options.timeout);
  SessionOutput out;
  out.protocol = protocol;
  out.role = role;
  if (role == Role::kClient) {
    run_client(ch, protocol, inputs, config, rng, out);
  } else {
    run_server(ch, protocol, inputs, config, rng, out);
  }
  out.stats = ch.stats();
  out.transcript = ch.transcript_digest();
  return out;
}

SessionPair run_two_party(ProtocolId protocol, const SessionInputs& client_inputs,
                          const SessionInputs& server_inputs, const SessionConfig& config,
                          Transport& client_transport, Transport& server_transport, Rng& rng) {
  auto client_rng = rng.fork("client");
  auto server_rng = rng.fork("server");
  SessionPair pair;
  std::exception_ptr server_error;
  std::thread server([&] {
    try {
      pair.server = run_session(Role::kServer, protocol, server_inputs, config, server_transport,
                                server_rng);
    } catch (...) {
      server_error = std::current_exception();
    }
    server_transport.close();
  });
  std::exception_ptr client_error;
  try {
    pair.client = run_session(Role::kClient, protocol, client_inputs, config, client_transport,
                              client_rng);
  } catch (...) {
    client_error = std::current_exception();
  }
  client_transport.close();
  server.join();
  if (client_error) std::rethrow_exception(client_error);
  if (server_error) std::rethrow_exception(server_error);
  return pair;
}

SessionPair run_loopback(ProtocolId protocol, const SessionInputs& client_inputs,
                         const SessionInputs& server_inputs, const SessionConfig& config, Rng& rng) {
  auto [a, b] = memory_transport_pair();
  return run_two_party(protocol, client_inputs, server_inputs, config, *a, *b, rng);
}

}  // namespace espresso
