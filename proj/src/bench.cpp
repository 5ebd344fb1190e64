#include "espresso/bench.hpp"

#include <time.h>

#include <chrono>
#include <exception>
#include <functional>
#include <json.hpp>
#include <set>
#include <thread>

namespace espresso {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) / 1e6;
}

/// Average time of fn, repeated until at least 20 ms have elapsed.
template <typename F>
double time_plaintext(F&& fn) {
  const auto start = Clock::now();
  std::size_t reps = 0;
  do {
    fn();
    ++reps;
  } while (ms_since(start) < 20.0);
  return ms_since(start) / static_cast<double>(reps);
}

}  // namespace

std::pair<std::vector<Bytes>, std::vector<Bytes>> random_set_pair(std::uint64_t size_a,
                                                                  std::uint64_t size_b,
                                                                  std::uint64_t common, Rng& rng) {
  if (common > size_a || common > size_b) {
    fail(ErrorCode::kInvalidArgument, "overlap larger than a set");
  }
  std::set<Bytes> seen;
  auto fresh = [&] {
    for (;;) {
      auto item = rng.bytes(16);
      if (seen.insert(item).second) return item;
    }
  };
  std::vector<Bytes> a, b;
  for (std::uint64_t i = 0; i < common; ++i) {
    auto item = fresh();
    a.push_back(item);
    b.push_back(std::move(item));
  }
  for (auto i = common; i < size_a; ++i) a.push_back(fresh());
  for (auto i = common; i < size_b; ++i) b.push_back(fresh());
  shuffle(a, rng);
  shuffle(b, rng);
  return {std::move(a), std::move(b)};
}

BenchReport run_bench(const BenchOptions& options, Rng& rng) {
  if (options.protocol == ProtocolId::kIris) {
    fail(ErrorCode::kInvalidArgument, "bench covers the set protocols only");
  }
  if (options.size == 0) fail(ErrorCode::kInvalidArgument, "bench size must be positive");
  const auto common = static_cast<std::uint64_t>(options.overlap * static_cast<double>(options.size));
  auto [a, b] = random_set_pair(options.size, options.size, common, rng);

  BenchReport report;
  report.protocol = std::string(protocol_name(options.protocol));
  report.client_size = a.size();
  report.server_size = b.size();

  SessionConfig config;
  config.options.params = options.params;
  config.options.k = options.k;
  const bool sketched = options.protocol == ProtocolId::kJaccardMinhash ||
                        options.protocol == ProtocolId::kApproxCard;
  if (sketched) {
    report.k = options.k;
    config.options.family_seed = rng.bytes(32);
  }

  auto server_rng = rng.fork("bench-server");
  auto client_rng = rng.fork("bench-client");

  if (!sketched) {
    const auto start = Clock::now();
    auto [state, tags] = server_precompute(options.params, b, server_rng);
    config.options.precomputed = std::make_shared<const PsiCaServerState>(std::move(state));
    report.offline_ms = ms_since(start);
  }

  // Plaintext computation of the same output. It is timed on both sides of
  // the online phase so that drift in host speed affects both figures alike.
  std::uint64_t card_truth = 0;
  Fraction truth;
  std::function<void()> plaintext;
  switch (options.protocol) {
    case ProtocolId::kPsiCa:
      plaintext = [&] { card_truth = oracle_intersection(a, b); };
      break;
    case ProtocolId::kJaccardExact:
    case ProtocolId::kMedia:
      plaintext = [&] { truth = oracle_jaccard(a, b); };
      break;
    case ProtocolId::kJaccardMinhash:
    case ProtocolId::kApproxCard:
      plaintext = [&] {
        auto family = family_new(options.k, config.options.family_seed);
        truth = estimate_multi(sketch_multi(family, a), sketch_multi(family, b));
      };
      break;
    case ProtocolId::kIris:
      break;
  }
  const double plaintext_before = time_plaintext(plaintext);

  SessionInputs client_in{a, std::nullopt, false};
  SessionInputs server_in{b, std::nullopt, false};
  auto [ct, st] = memory_transport_pair();
  SessionOutput client_out, server_out;
  std::exception_ptr server_error, client_error;

  const auto start = Clock::now();
  std::thread server([&] {
    const auto cpu0 = thread_cpu_ms();
    try {
      server_out = run_session(Role::kServer, options.protocol, server_in, config, *st, server_rng);
    } catch (...) {
      server_error = std::current_exception();
    }
    report.server_cpu_ms = thread_cpu_ms() - cpu0;
    st->close();
  });
  const auto cpu0 = thread_cpu_ms();
  try {
    client_out = run_session(Role::kClient, options.protocol, client_in, config, *ct, client_rng);
  } catch (...) {
    client_error = std::current_exception();
  }
  report.client_cpu_ms = thread_cpu_ms() - cpu0;
  ct->close();
  server.join();
  report.online_ms = ms_since(start);
  if (client_error) std::rethrow_exception(client_error);
  if (server_error) std::rethrow_exception(server_error);

  const auto& stats = client_out.stats;
  report.bytes_transferred = stats.total();
  report.overhead_bytes = stats.total() -
                          stats.payload_by_type[static_cast<int>(MsgType::kRound1)] -
                          stats.payload_by_type[static_cast<int>(MsgType::kRound2)];

  report.plaintext_ms = (plaintext_before + time_plaintext(plaintext)) / 2;
  switch (options.protocol) {
    case ProtocolId::kPsiCa:
      report.result = static_cast<double>(*client_out.cardinality);
      report.oracle_agrees = *client_out.cardinality == card_truth;
      break;
    case ProtocolId::kJaccardExact:
    case ProtocolId::kMedia:
    case ProtocolId::kJaccardMinhash:
      report.result = client_out.similarity->jaccard.value();
      report.oracle_agrees = client_out.similarity->jaccard == truth;
      break;
    case ProtocolId::kApproxCard: {
      const auto& approx = *client_out.approx;
      report.result = approx.estimate.value();
      report.oracle_agrees = approx.delta == truth &&
                             approx.estimate == Fraction{truth.num * (a.size() + b.size()), truth.num + truth.den};
      break;
    }
    case ProtocolId::kIris:
      break;
  }
  report.slowdown = report.plaintext_ms > 0 ? report.online_ms / report.plaintext_ms : 0;
  return report;
}

std::string to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["protocol"] = r.protocol;
  j["client_size"] = r.client_size;
  j["server_size"] = r.server_size;
  if (r.k) j["k"] = r.k;
  j["offline_ms"] = r.offline_ms;
  j["online_ms"] = r.online_ms;
  j["client_cpu_ms"] = r.client_cpu_ms;
  j["server_cpu_ms"] = r.server_cpu_ms;
  j["bytes_transferred"] = r.bytes_transferred;
  j["overhead_bytes"] = r.overhead_bytes;
  j["plaintext_ms"] = r.plaintext_ms;
  j["slowdown"] = r.slowdown;
  j["result"] = r.result;
  j["oracle_agrees"] = r.oracle_agrees;
  return j.dump();
}

}  // namespace espresso
