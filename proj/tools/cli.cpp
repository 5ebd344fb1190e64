// espresso: command-line front end for the private similarity protocols,
// their plaintext oracles, the trigram attack toolkit and the benchmarks.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "espresso/apps_doc.hpp"
#include "espresso/apps_iris.hpp"
#include "espresso/apps_media.hpp"
#include "espresso/attack.hpp"
#include "espresso/bench.hpp"
#include "espresso/session.hpp"

namespace {

using namespace espresso;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitIo = 4;

constexpr std::uint16_t kDefaultPort = 7766;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    case ErrorCode::kProtocolAbort:
    case ErrorCode::kPeerAbort:
    case ErrorCode::kHandshakeMismatch:
    case ErrorCode::kTimeout:
    case ErrorCode::kDecode:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kLengthOverflow:
    case ErrorCode::kUnknownMessage:
      return kExitProtocol;
    case ErrorCode::kIo:
    case ErrorCode::kTransport:
      return kExitIo;
    default:
      return kExitOther;
  }
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::mutex g_out_mutex;
bool g_json_only = false;

void emit(const json& record, const std::string& summary) {
  std::lock_guard lock(g_out_mutex);
  std::cout << record.dump() << std::endl;
  if (!g_json_only && !summary.empty()) std::cerr << summary << std::endl;
}

json fraction_json(const Fraction& f) {
  return json{{"num", f.num}, {"den", f.den}, {"value", f.value()}};
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::kIo, "cannot read " + path);
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << data;
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
}

// One item per line. A trailing '\r' is dropped and empty lines are skipped.
std::vector<Bytes> read_set_file(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<Bytes> items;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) items.push_back(to_bytes(line));
  }
  return items;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& item : read_set_file(path)) out.emplace_back(item.begin(), item.end());
  return out;
}

Fraction parse_fraction(const std::string& text, const std::string& flag) {
  auto bad = [&] { throw UsageError(flag + ": expected a fraction like 1/3 or 0.33, got '" + text + "'"); };
  try {
    auto slash = text.find('/');
    if (slash != std::string::npos) {
      std::size_t used_n = 0, used_d = 0;
      auto num = std::stoull(text.substr(0, slash), &used_n);
      auto den = std::stoull(text.substr(slash + 1), &used_d);
      if (used_n != slash || used_d != text.size() - slash - 1 || den == 0) bad();
      return {num, den};
    }
    auto dot = text.find('.');
    std::string digits = text;
    std::uint64_t den = 1;
    if (dot != std::string::npos) {
      digits = text.substr(0, dot) + text.substr(dot + 1);
      for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
    }
    if (digits.empty() || digits.size() > 18 ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      bad();
    }
    return {std::stoull(digits), den};
  } catch (const std::logic_error&) {
    bad();
  }
  return {};
}

// "builtin", "toy", or a JSON file with hex p, q and g.
GroupParams load_params(const std::string& flag_value) {
  std::string source = flag_value;
  if (source.empty()) {
    if (const char* env = std::getenv("ESPRESSO_PARAMS"); env != nullptr && *env != '\0') source = env;
  }
  if (source.empty() || source == "builtin") return builtin_params();
  if (source == "toy") return toy_params();
  json doc;
  try {
    doc = json::parse(read_file(source));
    return GroupParams(mpz_class(doc.at("p").get<std::string>(), 16),
                       mpz_class(doc.at("q").get<std::string>(), 16),
                       mpz_class(doc.at("g").get<std::string>(), 16));
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedInput, "params file " + source + ": " + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::kMalformedInput, "params file " + source + ": values must be hex strings");
  }
}

json params_json(const GroupParams& gp) {
  return json{{"p", gp.p().get_str(16)},
              {"q", gp.q().get_str(16)},
              {"g", gp.g().get_str(16)},
              {"p_bits", gp.p_bits()},
              {"q_bits", gp.q_bits()},
              {"fingerprint", gp.fingerprint()}};
}

Rng make_rng(const std::string& seed) {
  return seed.empty() ? Rng::system() : Rng::seeded(std::string_view(seed));
}

// ---------------------------------------------------------------------------
// Shared protocol flags
// ---------------------------------------------------------------------------

struct NetFlags {
  std::string role;
  std::string input;
  std::string params_file;
  std::string connect;
  std::string bind;
  std::uint16_t port = 0;
  std::string loopback;
  std::string file_pair;
  std::string seed;
  std::string family_seed_hex;
  std::uint32_t k = 400;
  double timeout_s = kDefaultRoundTimeout.count() / 1000.0;
  bool once = false;
};

void add_net_flags(CLI::App* cmd, NetFlags& f, bool with_k) {
  cmd->add_option("role", f.role, "client or server")->required()->check(CLI::IsMember({"client", "server"}));
  cmd->add_option("input", f.input, "Local input file")->required();
  cmd->add_option("--params-file", f.params_file,
                  "Group parameters: builtin, toy, or a JSON file from gen-params (default $ESPRESSO_PARAMS)");
  cmd->add_option("--connect", f.connect, "Client: server address HOST:PORT");
  cmd->add_option("--bind", f.bind, "Server: listen address (default $ESPRESSO_BIND or 127.0.0.1)");
  cmd->add_option("--port", f.port, "Server: listen port (default $ESPRESSO_PORT or 7766; 0 picks one)");
  cmd->add_option("--loopback", f.loopback,
                  "Client: run both roles in-process against this peer input and cross-check the oracle");
  cmd->add_option("--file-pair", f.file_pair, "Exchange frames through files in this directory");
  cmd->add_option("--seed", f.seed, "Seed the random generator (reproducible runs)");
  cmd->add_option("--timeout", f.timeout_s, "Per-round timeout in seconds")->check(CLI::PositiveNumber);
  cmd->add_flag("--once", f.once, "Server: serve a single session, then exit");
  if (with_k) {
    cmd->add_option("--k", f.k, "Sketch size")->check(CLI::Range(1u, 1u << 20));
    cmd->add_option("--family-seed", f.family_seed_hex,
                    "Hex seed of the hash family (client: proposed; server: required)");
  }
}

SessionConfig make_config(const NetFlags& f) {
  SessionConfig c;
  c.options.params = load_params(f.params_file);
  c.options.k = f.k;
  c.options.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(f.timeout_s * 1000));
  if (!f.family_seed_hex.empty()) c.options.family_seed = from_hex(f.family_seed_hex);
  if (c.options.params.insecure()) {
    std::cerr << "warning: group parameters below 1024/160 bits are for testing only" << std::endl;
  }
  return c;
}

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw UsageError("--connect expects HOST:PORT");
  try {
    std::size_t used = 0;
    auto port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port == 0 || port > 65535) throw std::out_of_range("port");
    return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw UsageError("--connect: bad port in '" + text + "'");
  }
}

std::uint16_t listen_port(const NetFlags& f, const CLI::App* cmd) {
  if (cmd->count("--port") > 0) return f.port;
  if (const char* env = std::getenv("ESPRESSO_PORT"); env != nullptr && *env != '\0') {
    try {
      auto p = std::stoul(env);
      if (p <= 65535) return static_cast<std::uint16_t>(p);
    } catch (const std::logic_error&) {
    }
    throw UsageError("ESPRESSO_PORT must be a port number");
  }
  return kDefaultPort;
}

std::string listen_address(const NetFlags& f) {
  if (!f.bind.empty()) return f.bind;
  if (const char* env = std::getenv("ESPRESSO_BIND"); env != nullptr && *env != '\0') return env;
  return "127.0.0.1";
}

// ---------------------------------------------------------------------------
// Protocol records
// ---------------------------------------------------------------------------

json base_record(const SessionOutput& out) {
  return json{{"protocol", protocol_name(out.protocol)}, {"role", out.role == Role::kClient ? "client" : "server"}};
}

void add_transcript(json& rec, const SessionOutput& out) {
  rec["bytes_sent"] = out.stats.bytes_sent;
  rec["bytes_received"] = out.stats.bytes_received;
  rec["transcript"] = to_hex(out.transcript);
}

std::pair<json, std::string> describe(const SessionOutput& out) {
  json rec = base_record(out);
  std::ostringstream summary;
  if (out.role == Role::kServer) {
    if (out.served) {
      if (out.served->client_size) rec["client_size"] = *out.served->client_size;
      if (out.served->k != 0) rec["k"] = out.served->k;
    }
    if (out.served_iris) {
      rec["n"] = out.served_iris->n;
      rec["k"] = out.served_iris->k;
      rec["rotations"] = out.served_iris->rotations;
    }
    summary << "served one " << protocol_name(out.protocol) << " session";
  } else if (out.cardinality) {
    rec["cardinality"] = *out.cardinality;
    summary << "|A ∩ B| = " << *out.cardinality;
  } else if (out.similarity) {
    const auto& s = *out.similarity;
    rec["jaccard"] = fraction_json(s.jaccard);
    rec["mode"] = s.mode == SimilarityResult::Mode::kExact ? "exact" : "approximated";
    if (s.k) rec["k"] = *s.k;
    if (s.intersection_estimate) rec["intersection_estimate"] = fraction_json(*s.intersection_estimate);
    summary << "J = " << fmt(s.jaccard.value()) << " (" << rec["mode"].get<std::string>() << ")";
  } else if (out.approx) {
    const auto& a = *out.approx;
    rec["delta"] = fraction_json(a.delta);
    rec["estimate"] = fraction_json(a.estimate);
    rec["server_size"] = a.server_size;
    summary << "|A ∩ B| ≈ " << fmt(a.estimate.value(), 1) << " (server set size " << a.server_size << ")";
  } else if (out.iris) {
    const auto& m = *out.iris;
    rec["matched"] = m.matched;
    rec["best_distance"] = fraction_json(m.best_distance);
    rec["best_shift"] = m.best_shift;
    json rots = json::array();
    for (const auto& r : m.rotations) {
      json jr{{"shift", r.shift}, {"c1", r.c1}, {"c2", r.c2}};
      jr["distance"] = r.distance ? fraction_json(*r.distance) : json(nullptr);
      rots.push_back(jr);
    }
    rec["rotations"] = rots;
    summary << (m.matched ? "match" : "no match") << ": distance " << fmt(m.best_distance.value())
            << " at shift " << m.best_shift;
  }
  add_transcript(rec, out);
  return {rec, summary.str()};
}

// ---------------------------------------------------------------------------
// Running a protocol subcommand
// ---------------------------------------------------------------------------

struct ProtocolSpec {
  ProtocolId protocol;
  // Reads the local input file into session inputs.
  std::function<SessionInputs(const std::string&)> load;
  // Loopback only: plaintext cross-check from both inputs and the result.
  std::function<json(const SessionInputs&, const SessionInputs&, const SessionConfig&, const SessionOutput&)> oracle;
};

int serve(const ProtocolSpec& spec, const NetFlags& f, const CLI::App* cmd, const SessionConfig& base_config) {
  auto inputs = spec.load(f.input);
  auto config = base_config;
  const bool exact_set = spec.protocol == ProtocolId::kPsiCa || spec.protocol == ProtocolId::kJaccardExact ||
                         (spec.protocol == ProtocolId::kMedia && !inputs.approximate);
  auto rng = make_rng(f.seed);
  if (exact_set) {
    // Tags are fixed once and reused by every session.
    auto [state, tags] = server_precompute(config.options.params, inputs.items, rng);
    config.options.precomputed = std::make_shared<PsiCaServerState>(std::move(state));
  }

  auto serve_one = [&](Transport& transport, Rng& session_rng) {
    auto out = run_session(Role::kServer, spec.protocol, inputs, config, transport, session_rng);
    auto [rec, summary] = describe(out);
    emit(rec, summary);
  };

  if (!f.file_pair.empty()) {
    auto transport = FileTransport::server_side(f.file_pair);
    serve_one(*transport, rng);
    transport->close();
    return kExitOk;
  }

  TcpListener listener(listen_address(f), listen_port(f, cmd));
  std::cerr << "listening on " << listen_address(f) << ":" << listener.port() << std::endl;
  if (f.once) {
    auto transport = listener.accept(config.options.timeout);
    serve_one(*transport, rng);
    return kExitOk;
  }
  // One thread per connection; failures are reported and the listener stays up.
  std::uint64_t counter = 0;
  for (;;) {
    std::unique_ptr<TcpTransport> transport;
    try {
      transport = listener.accept(std::chrono::hours(24));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTimeout) continue;
      throw;
    }
    auto session_rng = rng.fork("session-" + std::to_string(counter++));
    std::thread([&serve_one, t = std::move(transport), r = std::move(session_rng)]() mutable {
      try {
        serve_one(*t, r);
      } catch (const Error& e) {
        std::lock_guard lock(g_out_mutex);
        std::cerr << "session failed: " << e.what() << std::endl;
      }
    }).detach();
  }
}

int run_client(const ProtocolSpec& spec, const NetFlags& f, const SessionConfig& base_config) {
  const int targets = (f.connect.empty() ? 0 : 1) + (f.loopback.empty() ? 0 : 1) + (f.file_pair.empty() ? 0 : 1);
  if (targets != 1) throw UsageError("client needs exactly one of --connect, --loopback, --file-pair");
  auto inputs = spec.load(f.input);
  auto config = base_config;
  auto rng = make_rng(f.seed);

  if (!f.loopback.empty()) {
    auto peer = spec.load(f.loopback);
    // A fixed family seed lets the oracle rebuild the same sketches.
    const bool sketched = spec.protocol == ProtocolId::kJaccardMinhash || spec.protocol == ProtocolId::kApproxCard ||
                          (spec.protocol == ProtocolId::kMedia && inputs.approximate);
    if (sketched && config.options.family_seed.empty()) config.options.family_seed = rng.bytes(32);
    auto pair = run_loopback(spec.protocol, inputs, peer, config, rng);
    auto [rec, summary] = describe(pair.client);
    rec["loopback"] = true;
    json check = spec.oracle(inputs, peer, config, pair.client);
    rec["oracle"] = check;
    const bool agrees = check.value("agrees", true);
    emit(rec, summary + (agrees ? "  [oracle agrees]" : "  [ORACLE DISAGREES]"));
    return agrees ? kExitOk : kExitOther;
  }

  std::unique_ptr<Transport> transport;
  if (!f.file_pair.empty()) {
    transport = FileTransport::client_side(f.file_pair);
  } else {
    auto [host, port] = parse_host_port(f.connect);
    transport = TcpTransport::connect(host, port, config.options.timeout);
  }
  auto out = run_session(Role::kClient, spec.protocol, inputs, config, *transport, rng);
  transport->close();
  auto [rec, summary] = describe(out);
  emit(rec, summary);
  return kExitOk;
}

int run_protocol(const ProtocolSpec& spec, const NetFlags& f, const CLI::App* cmd) {
  auto config = make_config(f);
  if (f.role == "server") {
    if (!f.loopback.empty() || !f.connect.empty()) throw UsageError("--loopback and --connect are client options");
    return serve(spec, f, cmd, config);
  }
  return run_client(spec, f, config);
}

// ---------------------------------------------------------------------------
// Oracles for loopback cross-checks
// ---------------------------------------------------------------------------

json set_oracle(const SessionInputs& a, const SessionInputs& b, const SessionConfig& config,
                const SessionOutput& out) {
  json o;
  o["intersection"] = oracle_intersection(a.items, b.items);
  o["jaccard"] = fraction_json(oracle_jaccard(a.items, b.items));
  if (out.cardinality) {
    o["agrees"] = *out.cardinality == oracle_intersection(a.items, b.items);
  } else if (out.similarity && out.similarity->mode == SimilarityResult::Mode::kExact) {
    o["agrees"] = out.similarity->jaccard == oracle_jaccard(a.items, b.items);
  } else {
    auto family = family_new(config.options.k, config.options.family_seed);
    auto plain = estimate_multi(sketch_multi(family, a.items), sketch_multi(family, b.items));
    o["sketch_estimate"] = fraction_json(plain);
    if (out.similarity) {
      o["agrees"] = out.similarity->jaccard == plain;
      o["abs_error"] = std::abs(plain.value() - oracle_jaccard(a.items, b.items).value());
    } else if (out.approx) {
      o["agrees"] = out.approx->delta == plain;
      o["abs_error"] = std::abs(out.approx->estimate.value() -
                                static_cast<double>(oracle_intersection(a.items, b.items)));
    }
  }
  return o;
}

json iris_oracle(const SessionInputs& a, const SessionInputs& b, const SessionConfig& config,
                 const SessionOutput& out) {
  // The private result is an estimate from k sampled positions, so only
  // the plaintext values are reported next to it.
  json o;
  std::optional<Fraction> best;
  std::int64_t best_shift = 0;
  const auto max_shift = static_cast<std::int64_t>(config.iris.max_shift);
  for (std::int64_t s = -max_shift; s <= max_shift; ++s) {
    try {
      auto d = whd(rotate(*a.iris, s), *b.iris);
      if (!best || d.value() < best->value()) {
        best = d;
        best_shift = s;
      }
    } catch (const Error&) {
    }
  }
  if (best) {
    o["best_distance"] = fraction_json(*best);
    o["best_shift"] = best_shift;
    o["matched"] = best->num * config.iris.threshold.den < config.iris.threshold.num * best->den;
    if (out.iris) o["abs_error"] = std::abs(out.iris->best_distance.value() - best->value());
  }
  return o;
}

// ---------------------------------------------------------------------------
// Input loaders
// ---------------------------------------------------------------------------

SessionInputs load_set(const std::string& path) {
  SessionInputs in;
  in.items = read_set_file(path);
  return in;
}

SessionInputs load_document(const std::string& path) {
  auto r = trigram_set(read_file(path));
  if (r.too_short) fail(ErrorCode::kEmptySet, path + ": fewer than three characters after normalization");
  SessionInputs in;
  in.items = r.set.items();
  return in;
}

FeatureSet load_features(const std::string& path, const Fraction& threshold) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".ppm") || ends_with(".PPM")) return extract_features(read_ppm(path), threshold);
  return parse_feature_file(read_file(path));
}

// ---------------------------------------------------------------------------
// Subcommands without a peer
// ---------------------------------------------------------------------------

int cmd_gen_params(unsigned p_bits, unsigned q_bits, const std::string& preset, const std::string& seed,
                   const std::string& out_path) {
  GroupParams gp;
  if (preset == "builtin") {
    gp = builtin_params();
  } else if (preset == "toy") {
    gp = toy_params();
  } else {
    gp = seed.empty() ? generate_params(p_bits, q_bits) : generate_params(p_bits, q_bits, to_bytes(seed));
  }
  auto rec = params_json(gp);
  if (!out_path.empty()) {
    write_file(out_path, json{{"p", rec["p"]}, {"q", rec["q"]}, {"g", rec["g"]}}.dump(2) + "\n");
  }
  emit(rec, "group " + std::to_string(gp.p_bits()) + "/" + std::to_string(gp.q_bits()) + " bits, fingerprint " +
                gp.fingerprint() + (gp.insecure() ? " (testing only)" : ""));
  return kExitOk;
}

int cmd_oracle(const std::string& what, const std::string& a, const std::string& b) {
  json rec{{"oracle", what}};
  std::string summary;
  if (what == "whd") {
    auto d = whd(parse_iris(read_file(a)), parse_iris(read_file(b)));
    rec["whd"] = fraction_json(d);
    summary = "WHD = " + fmt(d.value());
  } else {
    auto sa = read_set_file(a), sb = read_set_file(b);
    if (what == "jaccard") {
      auto j = oracle_jaccard(sa, sb);
      rec["jaccard"] = fraction_json(j);
      summary = "J = " + fmt(j.value());
    } else {
      auto c = oracle_intersection(sa, sb);
      rec["intersection"] = c;
      summary = "|A ∩ B| = " + std::to_string(c);
    }
  }
  emit(rec, summary);
  return kExitOk;
}

int cmd_build_space(const std::vector<std::string>& docs, const std::string& out_path) {
  std::vector<std::string> texts;
  for (const auto& d : docs) texts.push_back(read_file(d));
  auto space = build_space(texts);
  TrigramSet set;
  set.grams = space;
  auto text = export_grams(set);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  std::cerr << space.size() << " trigrams from " << docs.size() << " document(s)" << std::endl;
  return kExitOk;
}

std::set<std::string> load_space(const std::string& path) {
  auto lines = read_lines(path);
  return {lines.begin(), lines.end()};
}

int cmd_check_word(const std::string& space_path, const std::vector<std::string>& words) {
  auto space = load_space(space_path);
  for (const auto& w : words) {
    auto m = word_in_space(space, w);
    emit(json{{"word", w}, {"verdict", membership_name(m)}}, w + ": " + std::string(membership_name(m)));
  }
  return kExitOk;
}

int cmd_extract(const std::string& space_path, std::size_t max_len, std::size_t limit,
                const std::string& dictionary) {
  auto graph = build_graph(load_space(space_path));
  auto frags = extract_fragments(graph, max_len, limit);
  if (!dictionary.empty()) frags = filter_fragments(frags, read_lines(dictionary));
  for (const auto& f : frags) emit(json{{"fragment", f}}, "");
  std::cerr << frags.size() << " fragment(s) from " << graph.vertices.size() << " vertices, "
            << graph.edge_count() << " edges" << std::endl;
  return kExitOk;
}

int cmd_bench(const std::string& protocol, std::uint64_t size, std::uint32_t k, int runs, double overlap,
              const std::string& params_file, const std::string& seed) {
  auto id = protocol_from_name(protocol);
  if (!id || *id == ProtocolId::kIris) throw UsageError("bench: unknown or unsupported protocol '" + protocol + "'");
  BenchOptions opts;
  opts.protocol = *id;
  opts.size = size;
  opts.k = k;
  opts.overlap = overlap;
  opts.params = load_params(params_file);
  auto rng = make_rng(seed);
  std::vector<double> slowdowns;
  for (int i = 0; i < runs; ++i) {
    auto report = run_bench(opts, rng);
    slowdowns.push_back(report.slowdown);
    auto rec = json::parse(to_json(report));
    rec["run"] = i + 1;
    emit(rec, protocol + " |A|=|B|=" + std::to_string(size) + ": online " + fmt(report.online_ms, 1) + " ms, " +
                  std::to_string(report.bytes_transferred) + " bytes, slowdown " + fmt(report.slowdown, 1) + "x" +
                  (report.oracle_agrees ? "" : "  [ORACLE DISAGREES]"));
    if (!report.oracle_agrees) return kExitOther;
  }
  if (runs > 1) {
    auto [lo, hi] = std::minmax_element(slowdowns.begin(), slowdowns.end());
    emit(json{{"summary", protocol}, {"runs", runs}, {"slowdown_min", *lo}, {"slowdown_max", *hi}},
         "slowdown range " + fmt(*lo, 1) + "x .. " + fmt(*hi, 1) + "x over " + std::to_string(runs) + " runs");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private set similarity: PSI-CA, Jaccard, MinHash and their applications"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json_only, "Print only the JSON records");
  app.fallthrough();

  // gen-params
  auto* gen = app.add_subcommand("gen-params", "Generate or export group parameters");
  unsigned p_bits = 1024, q_bits = 160;
  std::string gen_preset, gen_seed, gen_out;
  gen->add_option("--p-bits", p_bits, "Bits of p")->check(CLI::Range(48u, 4096u));
  gen->add_option("--q-bits", q_bits, "Bits of q")->check(CLI::Range(16u, 512u));
  gen->add_option("--preset", gen_preset, "Export a built-in group instead")->check(CLI::IsMember({"builtin", "toy"}));
  gen->add_option("--seed", gen_seed, "Deterministic generation seed");
  gen->add_option("-o,--output", gen_out, "Write a params file usable with --params-file");

  // Protocol subcommands
  NetFlags psi_f, jac_f, card_f, doc_f, iris_f, media_f;
  std::string jac_mode;
  bool doc_approx = false, media_approx = false, literal = false;
  std::string threshold_text, feature_threshold_text;
  std::uint32_t iris_k = kDefaultIrisK, max_shift = kDefaultMaxShift;

  auto* psi = app.add_subcommand("psi-ca", "Private set intersection cardinality");
  add_net_flags(psi, psi_f, false);

  auto* jac = app.add_subcommand("jaccard", "Private Jaccard index of two sets");
  jac->add_option("mode", jac_mode, "exact or minhash")->required()->check(CLI::IsMember({"exact", "minhash"}));
  add_net_flags(jac, jac_f, true);

  auto* card = app.add_subcommand("approx-card", "Size-hiding approximate intersection cardinality");
  add_net_flags(card, card_f, true);

  auto* doc = app.add_subcommand("doc-sim", "Private similarity of two text documents (trigram sets)");
  add_net_flags(doc, doc_f, true);
  doc->add_flag("--approx", doc_approx, "Use the MinHash approximation");

  auto* iris = app.add_subcommand("iris-match", "Private iris code matching");
  add_net_flags(iris, iris_f, false);
  iris->add_option("--threshold", threshold_text, "Match when the distance is below this (e.g. 1/3 or 0.33)");
  iris->add_option("--k", iris_k, "Sampled positions")->check(CLI::Range(1u, 1u << 20));
  iris->add_option("--max-shift", max_shift, "Rotations tried on either side")->check(CLI::Range(0u, 1u << 16));
  iris->add_flag("--literal-formula", literal, "Distance (n - c2) / c1 instead of (c1 - c2) / c1");

  auto* media = app.add_subcommand("media-sim", "Private similarity of two images (PPM or feature files)");
  add_net_flags(media, media_f, true);
  media->add_flag("--approx", media_approx, "Use the MinHash approximation");
  media->add_option("--threshold-features", feature_threshold_text,
                    "Minimum pixel share of a colour bin (default 1/512)");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Plaintext reference computations");
  std::string oracle_what, oracle_a, oracle_b;
  oracle->add_option("what", oracle_what, "jaccard, intersection or whd")
      ->required()
      ->check(CLI::IsMember({"jaccard", "intersection", "whd"}));
  oracle->add_option("a", oracle_a, "First input")->required();
  oracle->add_option("b", oracle_b, "Second input")->required();

  // attack
  auto* attack = app.add_subcommand("attack", "Trigram-space reconstruction toolkit");
  attack->require_subcommand(1);
  attack->fallthrough();
  auto* build = attack->add_subcommand("build-space", "Union of trigram sets of documents");
  std::vector<std::string> build_docs;
  std::string build_out;
  build->add_option("documents", build_docs, "Text files")->required();
  build->add_option("-o,--output", build_out, "Write the space here instead of stdout");
  auto* check = attack->add_subcommand("check-word", "Test whether words may occur in a space");
  std::string check_space;
  std::vector<std::string> check_words;
  check->add_option("space", check_space, "Trigram file, one per line")->required();
  check->add_option("words", check_words, "Words to test")->required();
  auto* extract = attack->add_subcommand("extract", "Reconstruct text fragments from a space");
  std::string extract_space, dictionary;
  std::size_t max_len = 40, limit = 1000;
  extract->add_option("space", extract_space, "Trigram file, one per line")->required();
  extract->add_option("--max-len", max_len, "Longest fragment in characters")->check(CLI::Range(3, 100000));
  extract->add_option("--limit", limit, "Most fragments returned")->check(CLI::Range(1, 100000000));
  extract->add_option("--dictionary", dictionary, "Keep fragments containing a word from this list");

  // bench
  auto* bench = app.add_subcommand("bench", "Time a protocol against its plaintext computation");
  std::string bench_protocol = "jaccard-exact", bench_params, bench_seed;
  std::uint64_t bench_size = 1000;
  std::uint32_t bench_k = 400;
  int bench_runs = 1;
  double bench_overlap = 0.5;
  bench->add_option("--protocol", bench_protocol, "psi-ca, jaccard-exact, jaccard-minhash, approx-card, media");
  bench->add_option("--size", bench_size, "|A| = |B|")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 24));
  bench->add_option("--k", bench_k, "Sketch size")->check(CLI::Range(1u, 1u << 20));
  bench->add_option("--runs", bench_runs, "Repetitions")->check(CLI::Range(1, 1000));
  bench->add_option("--overlap", bench_overlap, "Share of common items")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--params-file", bench_params, "builtin, toy, or a params file");
  bench->add_option("--seed", bench_seed, "Seed the random generator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_params(p_bits, q_bits, gen_preset, gen_seed, gen_out);
    if (*oracle) return cmd_oracle(oracle_what, oracle_a, oracle_b);
    if (*build) return cmd_build_space(build_docs, build_out);
    if (*check) return cmd_check_word(check_space, check_words);
    if (*extract) return cmd_extract(extract_space, max_len, limit, dictionary);
    if (*bench) return cmd_bench(bench_protocol, bench_size, bench_k, bench_runs, bench_overlap, bench_params, bench_seed);

    if (*psi) return run_protocol({ProtocolId::kPsiCa, load_set, set_oracle}, psi_f, psi);
    if (*jac) {
      auto id = jac_mode == "exact" ? ProtocolId::kJaccardExact : ProtocolId::kJaccardMinhash;
      return run_protocol({id, load_set, set_oracle}, jac_f, jac);
    }
    if (*card) return run_protocol({ProtocolId::kApproxCard, load_set, set_oracle}, card_f, card);
    if (*doc) {
      auto id = doc_approx ? ProtocolId::kJaccardMinhash : ProtocolId::kJaccardExact;
      return run_protocol({id, load_document, set_oracle}, doc_f, doc);
    }
    if (*media) {
      auto threshold = feature_threshold_text.empty()
                           ? kDefaultFeatureThreshold
                           : parse_fraction(feature_threshold_text, "--threshold-features");
      auto loader = [threshold, media_approx](const std::string& path) {
        SessionInputs in;
        in.items = load_features(path, threshold).items();
        in.approximate = media_approx;
        return in;
      };
      return run_protocol({ProtocolId::kMedia, loader, set_oracle}, media_f, media);
    }
    if (*iris) {
      if (threshold_text.empty() && iris_f.role == "client") throw UsageError("iris-match: --threshold is required");
      NetFlags f = iris_f;
      auto run = [&] {
        auto config = make_config(f);
        config.iris.k = iris_k;
        config.iris.max_shift = max_shift;
        config.iris.literal_formula = literal;
        if (!threshold_text.empty()) config.iris.threshold = parse_fraction(threshold_text, "--threshold");
        auto loader = [](const std::string& path) {
          SessionInputs in;
          in.iris = parse_iris(read_file(path));
          return in;
        };
        ProtocolSpec spec{ProtocolId::kIris, loader, iris_oracle};
        if (f.role == "server") return serve(spec, f, iris, config);
        return run_client(spec, f, config);
      };
      return run();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const PeerAbortError& e) {
    std::cerr << "aborted by peer (" << error_code_name(e.peer_code()) << "): " << e.what() << std::endl;
    return kExitProtocol;
  } catch (const Error& e) {
    std::cerr << "error (" << error_code_name(e.code()) << "): " << e.what() << std::endl;
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitOther;
  }
  return kExitUsage;
}
