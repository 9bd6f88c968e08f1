#include "ergolab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ergolab/critical_orbits.hpp"
#include "ergolab/error.hpp"
#include "ergolab/kv_text.hpp"
#include "ergolab/observable.hpp"
#include "ergolab/report_io.hpp"
#include "ergolab/stats.hpp"
#include "ergolab/transfer.hpp"
#include "ergolab/version.hpp"

namespace ergolab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

template <class T>
void positive(T v, std::string_view src, int line, std::string_view key) {
  if (!(v > T(0))) parse_error(src, line, "field '" + std::string(key) + "': must be positive");
}

std::size_t parse_size(const KvEntry& e, std::string_view src) {
  const auto v = parse_int(e.value, src, e.line, e.key);
  if (v <= 0) parse_error(src, e.line, "field '" + e.key + "': must be positive");
  return static_cast<std::size_t>(v);
}

double parse_pos(const KvEntry& e, std::string_view src) {
  const double v = parse_double(e.value, src, e.line, e.key);
  positive(v, src, e.line, e.key);
  return v;
}

bool parse_bool(const KvEntry& e, std::string_view src) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  parse_error(src, e.line, "field '" + e.key + "': expected true or false");
}

std::string canon_list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + format_double(x);
  return s;
}

std::string canon_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (auto x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::string canonical_map(const ExperimentConfig& c) {
  std::string s = "builtin=" + c.map.builtin + "\ngamma=" + format_double(c.map.gamma) + "\nfile=";
  if (!c.map.file.empty()) {
    const fs::path p = fs::path(c.base_dir) / c.map.file;
    std::string body;
    try {
      body = read_text_file(p.string());
    } catch (const Error&) {
    }
    s += c.map.file + "#" + hex64(fnv1a64(body));
  }
  s += "\ninline=" + c.map.inline_text + "\n";
  for (const auto& o : c.map.order_overrides) s += "critical=" + o + "\n";
  return s;
}

std::string canonical_inducing(const ExperimentConfig& c) {
  const auto& p = c.inducing;
  return "delta=" + format_double(p.delta) + "\nq0=" + std::to_string(p.q0) +
         "\ntau_max=" + std::to_string(p.tau_max) + "\nrefine_tol=" + format_double(p.refine_tol) +
         "\nbind_factor=" + format_double(p.bind_factor) + "\nmax_cells=" + std::to_string(p.max_cells) + "\n";
}

std::string canonical_analysis(const ExperimentConfig& c) {
  const auto& a = c.analysis;
  return "order_delta=" + format_double(a.order_delta) + "\norder_samples=" + std::to_string(a.order_samples) +
         "\nexpansion_delta=" + format_double(a.expansion_delta) +
         "\nexpansion_horizon=" + std::to_string(a.expansion_horizon) +
         "\nexpansion_orbits=" + std::to_string(a.expansion_orbits) +
         "\norbit_horizon=" + std::to_string(a.orbit_horizon) + "\n";
}

std::string canonical_operator(const ExperimentConfig& c) {
  const auto& o = c.op;
  return "k=" + std::to_string(o.k) + "\nk_gap=" + std::to_string(o.k_gap) +
         "\nk_scheme=" + std::to_string(o.k_scheme) + "\nn_eigs=" + std::to_string(o.n_eigs) +
         "\ntheta=" + canon_list(o.theta) + "\nexport_limit=" + std::to_string(o.export_limit) + "\n";
}

std::string canonical_stats(const ExperimentConfig& c) {
  const auto& s = c.stats;
  return "N=" + std::to_string(s.N) + "\nn=" + std::to_string(s.n) + "\nburn_in=" + std::to_string(s.burn_in) +
         "\nseed=" + std::to_string(s.seed) + "\nobservable=" + s.observable +
         "\nks_threshold=" + format_double(s.ks_threshold) + "\nacf_lags=" + std::to_string(s.acf_lags) +
         "\ndecay_observable=" + s.decay_observable + "\ndecay_N=" + std::to_string(s.decay_N) +
         "\ndecay_window=" + std::to_string(s.decay_window) + "\ndecay_n_max=" + std::to_string(s.decay_n_max) +
         "\nld_epsilon=" + format_double(s.ld_epsilon) + "\nld_N=" + std::to_string(s.ld_N) +
         "\nld_grid=" + canon_list(s.ld_grid) + "\nenvelope_q=" + format_double(s.envelope_q) +
         "\nenvelope_delta=" + format_double(s.envelope_delta) + "\nenvelope=" + (s.envelope ? "1" : "0") + "\n";
}

}  // namespace

std::uint64_t ExperimentConfig::hash() const {
  return fnv1a64("[map]\n" + canonical_map(*this) + "[analysis]\n" + canonical_analysis(*this) +
                 "[inducing]\n" + canonical_inducing(*this) + "[operator]\n" + canonical_operator(*this) +
                 "[stats]\n" + canonical_stats(*this));
}

ExperimentConfig parse_config(std::string_view text, std::string_view source, std::string_view base_dir) {
  const KvDocument doc = parse_kv(text, source);
  ExperimentConfig cfg;
  cfg.source = std::string(source);
  cfg.base_dir = std::string(base_dir);
  const std::string src(source);
  bool have_version = false;
  std::string inline_lines;

  std::map<std::string, std::map<std::string, std::function<void(const KvEntry&)>>> fields;
  auto& top = fields[""];
  top["schema_version"] = [&](const KvEntry& e) {
    if (parse_int(e.value, src, e.line, e.key) != 1)
      parse_error(src, e.line, "field 'schema_version': only version 1 is supported");
    have_version = true;
  };

  auto& m = fields["map"];
  m["builtin"] = [&](const KvEntry& e) {
    if (e.value != "doubling" && e.value != "ulam" && e.value != "cusp")
      parse_error(src, e.line, "field 'builtin': expected doubling, ulam or cusp, got '" + e.value + "'");
    cfg.map.builtin = e.value;
  };
  m["gamma"] = [&](const KvEntry& e) {
    const double g = parse_double(e.value, src, e.line, e.key);
    if (!(g > 0.5 && g < 1.0)) parse_error(src, e.line, "field 'gamma': must lie in (0.5, 1)");
    cfg.map.gamma = g;
  };
  m["file"] = [&](const KvEntry& e) {
    if (e.value.empty()) parse_error(src, e.line, "field 'file': empty");
    cfg.map.file = e.value;
  };
  for (const char* k : {"name", "branch"})
    m[k] = [&](const KvEntry& e) { inline_lines += e.key + " = " + e.value + "\n"; };
  m["critical"] = [&](const KvEntry& e) { cfg.map.order_overrides.push_back(e.value); };

  auto& a = fields["analysis"];
  a["order_delta"] = [&](const KvEntry& e) { cfg.analysis.order_delta = parse_pos(e, src); };
  a["order_samples"] = [&](const KvEntry& e) { cfg.analysis.order_samples = parse_size(e, src); };
  a["expansion_delta"] = [&](const KvEntry& e) { cfg.analysis.expansion_delta = parse_pos(e, src); };
  a["expansion_horizon"] = [&](const KvEntry& e) { cfg.analysis.expansion_horizon = parse_size(e, src); };
  a["expansion_orbits"] = [&](const KvEntry& e) { cfg.analysis.expansion_orbits = parse_size(e, src); };
  a["orbit_horizon"] = [&](const KvEntry& e) { cfg.analysis.orbit_horizon = parse_size(e, src); };

  auto& in = fields["inducing"];
  in["delta"] = [&](const KvEntry& e) {
    cfg.inducing.delta = parse_pos(e, src);
    if (cfg.inducing.delta >= 0.5) parse_error(src, e.line, "field 'delta': must be below 0.5");
  };
  in["q0"] = [&](const KvEntry& e) { cfg.inducing.q0 = static_cast<int>(parse_size(e, src)); };
  in["tau_max"] = [&](const KvEntry& e) { cfg.inducing.tau_max = static_cast<int>(parse_size(e, src)); };
  in["refine_tol"] = [&](const KvEntry& e) { cfg.inducing.refine_tol = parse_pos(e, src); };
  in["bind_factor"] = [&](const KvEntry& e) { cfg.inducing.bind_factor = parse_pos(e, src); };
  in["max_cells"] = [&](const KvEntry& e) { cfg.inducing.max_cells = parse_size(e, src); };

  auto& op = fields["operator"];
  op["k"] = [&](const KvEntry& e) { cfg.op.k = parse_size(e, src); };
  op["k_gap"] = [&](const KvEntry& e) { cfg.op.k_gap = parse_size(e, src); };
  op["k_scheme"] = [&](const KvEntry& e) { cfg.op.k_scheme = parse_size(e, src); };
  op["n_eigs"] = [&](const KvEntry& e) { cfg.op.n_eigs = static_cast<int>(parse_size(e, src)); };
  op["export_limit"] = [&](const KvEntry& e) { cfg.op.export_limit = parse_size(e, src); };
  op["theta"] = [&](const KvEntry& e) {
    cfg.op.theta.clear();
    for (const auto& t : split_ws(e.value)) cfg.op.theta.push_back(parse_double(t, src, e.line, e.key));
    if (cfg.op.theta.empty()) parse_error(src, e.line, "field 'theta': empty list");
  };

  auto& st = fields["stats"];
  auto& S = cfg.stats;
  st["N"] = [&](const KvEntry& e) { S.N = parse_size(e, src); };
  st["n"] = [&](const KvEntry& e) { S.n = parse_size(e, src); };
  st["burn_in"] = [&](const KvEntry& e) {
    const auto v = parse_int(e.value, src, e.line, e.key);
    if (v < 0) parse_error(src, e.line, "field 'burn_in': must be non-negative");
    S.burn_in = static_cast<std::size_t>(v);
  };
  st["seed"] = [&](const KvEntry& e) { S.seed = parse_u64(e.value, src, e.line, e.key); };
  st["observable"] = [&](const KvEntry& e) {
    try {
      (void)make_observable(e.value);
    } catch (const Error& err) {
      parse_error(src, e.line, std::string("field 'observable': ") + err.what());
    }
    S.observable = e.value;
  };
  st["decay_observable"] = [&](const KvEntry& e) {
    try {
      (void)make_observable(e.value);
    } catch (const Error& err) {
      parse_error(src, e.line, std::string("field 'decay_observable': ") + err.what());
    }
    S.decay_observable = e.value;
  };
  st["ks_threshold"] = [&](const KvEntry& e) {
    S.ks_threshold = parse_pos(e, src);
    if (S.ks_threshold > 1) parse_error(src, e.line, "field 'ks_threshold': must not exceed 1");
  };
  st["acf_lags"] = [&](const KvEntry& e) { S.acf_lags = parse_size(e, src); };
  st["decay_N"] = [&](const KvEntry& e) { S.decay_N = parse_size(e, src); };
  st["decay_window"] = [&](const KvEntry& e) { S.decay_window = parse_size(e, src); };
  st["decay_n_max"] = [&](const KvEntry& e) { S.decay_n_max = parse_size(e, src); };
  st["ld_epsilon"] = [&](const KvEntry& e) { S.ld_epsilon = parse_pos(e, src); };
  st["ld_N"] = [&](const KvEntry& e) { S.ld_N = parse_size(e, src); };
  st["ld_grid"] = [&](const KvEntry& e) {
    S.ld_grid.clear();
    for (const auto& t : split_ws(e.value)) {
      const auto v = parse_int(t, src, e.line, e.key);
      if (v <= 0) parse_error(src, e.line, "field 'ld_grid': entries must be positive");
      S.ld_grid.push_back(static_cast<std::size_t>(v));
    }
    if (S.ld_grid.empty()) parse_error(src, e.line, "field 'ld_grid': empty list");
  };
  st["envelope_q"] = [&](const KvEntry& e) { S.envelope_q = parse_pos(e, src); };
  st["envelope_delta"] = [&](const KvEntry& e) {
    S.envelope_delta = parse_pos(e, src);
    if (S.envelope_delta >= 1) parse_error(src, e.line, "field 'envelope_delta': must lie in (0, 1)");
  };
  st["envelope"] = [&](const KvEntry& e) { S.envelope = parse_bool(e, src); };

  auto& out = fields["output"];
  out["dir"] = [&](const KvEntry& e) {
    if (e.value.empty()) parse_error(src, e.line, "field 'dir': empty");
    cfg.out_dir = e.value;
  };
  out["threads"] = [&](const KvEntry& e) {
    const auto v = parse_int(e.value, src, e.line, e.key);
    if (v < 0) parse_error(src, e.line, "field 'threads': must be non-negative");
    cfg.threads = static_cast<unsigned>(v);
  };

  for (const auto& e : doc.entries) {
    auto sec = fields.find(e.section);
    if (sec == fields.end()) parse_error(src, e.line, "unknown section '" + e.section + "'");
    auto f = sec->second.find(e.key);
    if (f == sec->second.end()) {
      const std::string where = e.section.empty() ? "top level" : "section [" + e.section + "]";
      parse_error(src, e.line, "unknown key '" + e.key + "' in " + where);
    }
    f->second(e);
  }
  if (!have_version) parse_error(src, 0, "missing schema_version");
  cfg.map.inline_text = inline_lines;
  const int kinds = !cfg.map.builtin.empty() + !cfg.map.file.empty() + !inline_lines.empty();
  if (kinds == 0) parse_error(src, 0, "missing map: give builtin, file or inline branch lines in [map]");
  if (kinds > 1) parse_error(src, 0, "[map]: builtin, file and inline definitions are exclusive");
  if (cfg.stats.n < 2) parse_error(src, 0, "field 'n': must be at least 2");
  if (cfg.stats.N < 2) parse_error(src, 0, "field 'N': must be at least 2");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  const fs::path p(path);
  return parse_config(text, path, p.has_parent_path() ? p.parent_path().string() : ".");
}

PiecewiseMap build_map(const ExperimentConfig& cfg) {
  const auto& ms = cfg.map;
  if (!ms.inline_text.empty() || !ms.file.empty()) {
    std::string text = "schema_version = 1\n";
    std::string src = cfg.source + " [map]";
    if (!ms.file.empty()) {
      const fs::path p = fs::path(cfg.base_dir) / ms.file;
      text = read_text_file(p.string());
      src = p.string();
    } else {
      text += ms.inline_text;
    }
    for (const auto& o : ms.order_overrides) text += "critical = " + o + "\n";
    return parse_map_text(text, src);
  }
  BuiltinParams bp;
  bp.gamma = ms.gamma;
  PiecewiseMap m = builtin_map(ms.builtin, bp);
  if (ms.order_overrides.empty()) return m;
  std::vector<CriticalPoint> crit;
  for (const auto& o : ms.order_overrides) {
    const auto tok = split_ws(o);
    if (tok.size() != 3) parse_error(cfg.source, 0, "field 'critical': expected '<location> <plus|minus> <order>'");
    CriticalPoint c;
    c.location = parse_double(tok[0], cfg.source, 0, "critical.location");
    c.side = (tok[1] == "minus" || tok[1] == "-") ? Side::minus : Side::plus;
    c.order = parse_double(tok[2], cfg.source, 0, "critical.order");
    crit.push_back(c);
  }
  PiecewiseMap out(m.name(), std::vector<Branch>(m.branches().begin(), m.branches().end()), crit);
  if (m.binary_shift()) out.mark_binary_shift();
  return out;
}

// ---------------------------------------------------------------------------
// Runner

namespace {

using Row = std::vector<CsvTable::Cell>;

CsvTable::Cell I(std::int64_t v) { return v; }
CsvTable::Cell I(std::size_t v) { return static_cast<std::int64_t>(v); }
CsvTable::Cell I(int v) { return static_cast<std::int64_t>(v); }
CsvTable::Cell D(double v) { return v; }
CsvTable::Cell S(std::string v) { return v; }

class Output {
 public:
  Output(const ExperimentConfig& cfg, RunResult& res) : dir_(cfg.out_dir), res_(res) {}

  void write(const std::string& name, std::string_view content) {
    write_file_atomic((fs::path(dir_) / name).string(), content);
    res_.files.push_back(name);
    hashes_.push_back(hex64(fnv1a64(content)));
  }
  void csv(const std::string& name, const CsvTable& t) { write(name, t.str()); }
  void check(std::string name, bool pass, std::string detail) {
    res_.checks.push_back({std::move(name), pass, std::move(detail)});
  }
  const std::vector<std::string>& hashes() const { return hashes_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  RunResult& res_;
  std::vector<std::string> hashes_;
};

std::string fmt(double v) { return format_double(v); }

// Binary cache blobs.
class Blob {
 public:
  template <class T>
  void put(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    data_.append(p, sizeof(T));
  }
  void put_str(const std::string& s) {
    put<std::uint64_t>(s.size());
    data_ += s;
  }
  template <class T>
  void put_vec(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    for (const auto& x : v) put(x);
  }
  const std::string& data() const { return data_; }

 private:
  std::string data_;
};

class BlobReader {
 public:
  explicit BlobReader(std::string d) : data_(std::move(d)) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) fail(ErrorCode::io, "truncated cache file");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint64_t>();
    if (pos_ + n > data_.size()) fail(ErrorCode::io, "truncated cache file");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <class T>
  std::vector<T> get_vec() {
    const auto n = get<std::uint64_t>();
    std::vector<T> v;
    v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(get<T>());
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

constexpr std::uint64_t kCacheMagic = 0x65726731'00000002ULL;

std::string cache_path(const ExperimentConfig& cfg, const std::string& stage, std::uint64_t key) {
  return (fs::path(cfg.out_dir) / "cache" / (stage + "-" + hex64(key) + ".bin")).string();
}

std::optional<std::string> read_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t scheme_key(const ExperimentConfig& cfg) {
  return fnv1a64("scheme\n" + canonical_map(cfg) + canonical_inducing(cfg));
}

std::uint64_t scheme_density_key(const ExperimentConfig& cfg) {
  return fnv1a64("scheme-density\n" + canonical_map(cfg) + canonical_inducing(cfg) +
                 std::to_string(cfg.op.k_scheme));
}

InducedScheme load_or_build_scheme(const ExperimentConfig& cfg, const PiecewiseMap& map, RunResult& res) {
  InducingParams params = cfg.inducing;
  params.threads = cfg.threads;
  const std::string path = cache_path(cfg, "scheme", scheme_key(cfg));
  if (auto blob = read_cache(path)) {
    try {
      BlobReader r(std::move(*blob));
      if (r.get<std::uint64_t>() != kCacheMagic) fail(ErrorCode::io, "bad cache magic");
      const auto n = r.get<std::uint64_t>();
      std::vector<Cell> cells(n);
      for (auto& c : cells) {
        c.left = r.get<Real>();
        c.right = r.get<Real>();
        c.image_left = r.get<Real>();
        c.image_right = r.get<Real>();
        c.tau = r.get<int>();
        c.b = r.get<int>();
        c.l0 = r.get<int>();
        c.crit = r.get<int>();
        c.sign = r.get<int>();
        c.itinerary = r.get_vec<std::uint8_t>();
        c.sup_inv = r.get<double>();
        c.var_inv = r.get<double>();
      }
      DiscardLedger led;
      led.truncated = r.get<Real>();
      led.unresolved = r.get<Real>();
      led.truncated_pieces = r.get<std::uint64_t>();
      led.unresolved_pieces = r.get<std::uint64_t>();
      led.min_truncated_b = r.get<int>();
      const auto nl = r.get<std::uint64_t>();
      for (std::uint64_t i = 0; i < nl; ++i) led.log.push_back(r.get_str());
      if (!r.done()) fail(ErrorCode::io, "trailing cache data");
      std::vector<CriticalOrbitData> orbits;
      const std::size_t horizon = std::max<std::size_t>(200, 4 * static_cast<std::size_t>(params.tau_max));
      for (const auto& c : map.critical_set()) orbits.push_back(orbit_data(map, c, horizon));
      res.messages.push_back("scheme loaded from cache " + path);
      return InducedScheme(map, params, std::move(cells), std::move(led), std::move(orbits));
    } catch (const Error& e) {
      res.messages.push_back(std::string("ignoring cache ") + path + ": " + e.what());
    }
  }
  InducedScheme s = build_partition(map, params);
  Blob b;
  b.put(kCacheMagic);
  b.put<std::uint64_t>(s.cells().size());
  for (const auto& c : s.cells()) {
    b.put(c.left);
    b.put(c.right);
    b.put(c.image_left);
    b.put(c.image_right);
    b.put(c.tau);
    b.put(c.b);
    b.put(c.l0);
    b.put(c.crit);
    b.put(c.sign);
    b.put_vec(c.itinerary);
    b.put(c.sup_inv);
    b.put(c.var_inv);
  }
  const auto& led = s.ledger();
  b.put(led.truncated);
  b.put(led.unresolved);
  b.put<std::uint64_t>(led.truncated_pieces);
  b.put<std::uint64_t>(led.unresolved_pieces);
  b.put(led.min_truncated_b);
  b.put<std::uint64_t>(led.log.size());
  for (const auto& l : led.log) b.put_str(l);
  write_file_atomic(path, b.data());
  return s;
}

struct SchemeOperator {
  UlamOperator L;
  SpectralReport density;
};

SchemeOperator scheme_operator(const ExperimentConfig& cfg, const InducedScheme& s) {
  SchemeOperator so;
  so.L = ulam_matrix(s, cfg.op.k_scheme);
  so.density = invariant_density(so.L);
  Blob b;
  b.put(kCacheMagic);
  b.put_vec(so.density.h);
  write_file_atomic(cache_path(cfg, "scheme-density", scheme_density_key(cfg)), b.data());
  return so;
}

std::vector<double> scheme_density(const ExperimentConfig& cfg, const InducedScheme& s, RunResult& res) {
  const std::string path = cache_path(cfg, "scheme-density", scheme_density_key(cfg));
  if (auto blob = read_cache(path)) {
    try {
      BlobReader r(std::move(*blob));
      if (r.get<std::uint64_t>() != kCacheMagic) fail(ErrorCode::io, "bad cache magic");
      auto h = r.get_vec<double>();
      if (h.size() == cfg.op.k_scheme && r.done()) {
        res.messages.push_back("scheme density loaded from cache " + path);
        return h;
      }
    } catch (const Error& e) {
      res.messages.push_back(std::string("ignoring cache ") + path + ": " + e.what());
    }
  }
  return scheme_operator(cfg, s).density.h;
}

struct ExactDensity {
  std::function<double(double)> pdf, cdf;
};

std::optional<ExactDensity> exact_density(const ExperimentConfig& cfg) {
  if (!cfg.map.order_overrides.empty()) return std::nullopt;
  if (cfg.map.builtin == "doubling") return ExactDensity{[](double) { return 1.0; }, [](double x) { return x; }};
  if (cfg.map.builtin == "ulam")
    return ExactDensity{[](double x) { return 1.0 / (M_PI * std::sqrt(x * (1.0 - x))); },
                        [](double x) { return 2.0 / M_PI * std::asin(std::sqrt(x)); }};
  return std::nullopt;
}

// analyze-map ---------------------------------------------------------------

void cmd_analyze_map(const ExperimentConfig& cfg, const PiecewiseMap& map, Output& out, RunResult& res) {
  const auto& a = cfg.analysis;
  bool mismatch = false;
  CsvTable rec({"point", "c0", "C0", "residual", "success", "hypothesis_fails"});
  for (const auto& c : map.critical_set()) {
    const OrderReport r = verify_order(map, c, a.order_delta, a.order_samples);
    CsvTable t({"quantity", "min", "max", "log_slope"});
    t.add({S("value"), D(r.value.min), D(r.value.max), D(r.value.log_slope)});
    t.add({S("first_derivative"), D(r.first.min), D(r.first.max), D(r.first.log_slope)});
    t.add({S("second_derivative"), D(r.second.min), D(r.second.max), D(r.second.log_slope)});
    out.csv("order_" + c.label() + ".csv", t);
    out.check("order_" + c.label(), !r.mismatch, r.mismatch ? r.diagnostic : "declared order " + fmt(c.order));
    if (r.mismatch) {
      mismatch = true;
      res.messages.push_back(r.diagnostic);
    }

    const CriticalOrbitData d = orbit_data(map, c, a.orbit_horizon);
    CsvTable o({"n", "orbit", "log_D", "log_d", "log_E"});
    for (std::size_t n = 0; n < d.orbit.size(); ++n)
      o.add({I(n), D(d.orbit[n]), D(n < d.log_D.size() ? d.log_D[n] : NAN),
             D(n < d.log_d.size() ? d.log_d[n] : NAN), D(n < d.log_E.size() ? d.log_E[n] : NAN)});
    out.csv("critical_orbit_" + c.label() + ".csv", o);
    const RecurrenceFit f = exp_recurrence_check(d);
    rec.add({S(c.label()), D(f.c0), D(f.C0), D(f.residual), I(f.success ? 1 : 0), I(f.hypothesis_fails ? 1 : 0)});
  }
  if (!map.critical_set().empty()) out.csv("recurrence.csv", rec);

  const ExpansionReport e =
      verify_expansion(map, a.expansion_delta, a.expansion_horizon, a.expansion_orbits, cfg.stats.seed);
  CsvTable t({"n", "min_log_deriv", "segments"});
  for (std::size_t i = 0; i < e.min_log_deriv.size(); ++i)
    t.add({I(i + 1), D(e.min_log_deriv[i]), I(i < e.counts.size() ? e.counts[i] : std::size_t{0})});
  out.csv("expansion.csv", t);
  CsvTable s({"key", "value"});
  s.add({S("delta"), D(e.delta)});
  s.add({S("kappa"), D(e.kappa)});
  s.add({S("kappa_vacuous"), D(e.kappa_vacuous ? 1 : 0)});
  s.add({S("kappa_witness"), D(e.kappa_witness)});
  s.add({S("c_delta"), D(e.c_delta)});
  s.add({S("lambda"), D(e.lambda)});
  s.add({S("inconclusive"), D(e.inconclusive ? 1 : 0)});
  s.add({S("segments"), D(static_cast<double>(e.segments))});
  out.csv("expansion_summary.csv", s);
  out.check("expansion", !e.inconclusive && e.lambda > 0,
            "lambda " + fmt(e.lambda) + (e.inconclusive ? " (inconclusive)" : ""));
  if (mismatch) res.exit_code = exit_validation;
}

// induce ---------------------------------------------------------------------

void cmd_induce(const ExperimentConfig& cfg, const PiecewiseMap& map, Output& out, RunResult& res) {
  const InducedScheme s = load_or_build_scheme(cfg, map, res);
  CsvTable cells({"left", "right", "tau", "b", "l0", "crit", "sign", "image_left", "image_right", "sup_inv",
                  "var_inv"});
  for (const auto& c : s.cells())
    cells.add({D(c.left_d()), D(c.right_d()), I(c.tau), I(c.b), I(c.l0), I(c.crit), I(c.sign),
               D(to_double(c.image_left)), D(to_double(c.image_right)), D(c.sup_inv), D(c.var_inv)});
  out.csv("cells.csv", cells);

  CsvTable sum({"point", "p", "N", "S3", "S4", "verdict3", "verdict4", "ratio3", "ratio4", "beta3", "beta4"});
  for (const auto& d : s.orbits())
    for (double p : {1.0, 2.0}) {
      const std::size_t N = d.log_E.empty() ? 0 : d.log_E.size() - 1;
      const SummabilityReport r = summability_report(d, p, N);
      sum.add({S(d.point.label()), D(p), I(r.N), D(r.S3), D(r.S4), S(verdict_name(r.v3)), S(verdict_name(r.v4)),
               D(r.ratio3), D(r.ratio4), D(r.beta3), D(r.beta4)});
    }
  out.csv("summability.csv", sum);

  const CellStatistics st = cell_statistics(s);
  CsvTable pb({"b", "count", "max_sup", "max_var", "sup_ratio", "var_ratio", "M_hat", "C_hat"});
  for (const auto& l : st.levels)
    pb.add({I(l.b), I(l.count), D(l.max_sup), D(l.max_var), D(l.sup_ratio), D(l.var_ratio), D(st.M_hat),
            D(st.C_hat)});
  out.csv("propbind.csv", pb);

  CsvTable fc({"p", "sup_sum", "var_sum", "tail_bound", "full_bound"});
  for (double p : {1.0, 2.0}) {
    const FConditionSums f = F_condition_sums(s, p, st);
    fc.add({D(p), D(f.sup_sum), D(f.var_sum), D(f.tail_bound), D(f.full_bound)});
  }
  out.csv("F_conditions.csv", fc);

  const TauTail tt = tau_distribution(s, TauWeight::lebesgue);
  CsvTable tau({"n", "lebesgue_tail"});
  for (std::size_t n = 0; n < tt.tail.size(); ++n) tau.add({I(n), D(tt.tail[n])});
  out.csv("tau.csv", tau);

  CsvTable led({"key", "value"});
  led.add({S("cells"), D(static_cast<double>(s.cells().size()))});
  led.add({S("coverage"), D(s.coverage())});
  led.add({S("truncated"), D(to_double(s.ledger().truncated))});
  led.add({S("unresolved"), D(to_double(s.ledger().unresolved))});
  led.add({S("truncated_pieces"), D(static_cast<double>(s.ledger().truncated_pieces))});
  led.add({S("unresolved_pieces"), D(static_cast<double>(s.ledger().unresolved_pieces))});
  led.add({S("max_tau"), D(s.max_tau())});
  out.csv("discard.csv", led);

  bool tau_ok = true;
  for (const auto& c : s.cells())
    if (c.tau < c.b || c.tau > cfg.inducing.q0 + c.b) tau_ok = false;
  out.check("tau_range", tau_ok, "tau in [b, q0 + b] on every cell");
  const bool covered = s.coverage() >= 0.95;
  out.check("coverage", covered, "coverage " + fmt(s.coverage()));
  if (!covered) {
    res.messages.push_back("warning: coverage " + fmt(s.coverage()) + " below 0.95");
    res.exit_code = exit_warning;
  } else if (!tau_ok) {
    res.exit_code = exit_check_failed;
  }
}

// spectrum -------------------------------------------------------------------

void write_triplets(Output& out, const std::string& name, const SparseRM& m) {
  CsvTable t({"row", "col", "value"});
  for (auto [i, j, v] : triplets(m)) t.add({I(i), I(j), D(v)});
  out.csv(name, t);
}

void cmd_spectrum(const ExperimentConfig& cfg, const PiecewiseMap& map, Output& out, RunResult& res) {
  const auto& o = cfg.op;
  const UlamOperator L = ulam_matrix(map, o.k);
  if (o.k <= o.export_limit) write_triplets(out, "operator_Lf.csv", L.matrix);
  const SpectralReport hd = invariant_density(L);
  const auto exact = exact_density(cfg);
  CsvTable dens({"i", "x", "h", "exact"});
  for (std::size_t i = 0; i < L.k; ++i) {
    const double x = L.midpoint(i);
    double ex = NAN;
    if (exact) ex = (exact->cdf(x + 0.5 / L.k) - exact->cdf(x - 0.5 / L.k)) * L.k;
    dens.add({I(i), D(x), D(hd.h[i]), D(ex)});
  }
  out.csv("density.csv", dens);
  double l1 = NAN;
  if (exact) {
    l1 = l1_to_exact(hd.h, exact->pdf, exact->cdf);
    out.check("density_l1", l1 < 0.05, "L1 distance " + fmt(l1));
  }

  const UlamOperator G = (o.k_gap == o.k) ? L : ulam_matrix(map, o.k_gap);
  const SpectralReport gap = spectral_gap(G, o.n_eigs);
  CsvTable ev({"rank", "re", "im", "modulus"});
  for (std::size_t i = 0; i < gap.eigenvalues.size(); ++i)
    ev.add({I(i), D(gap.eigenvalues[i].real()), D(gap.eigenvalues[i].imag()), D(std::abs(gap.eigenvalues[i]))});
  out.csv("eigenvalues.csv", ev);
  out.check("eigenvalue_one_simple", gap.multiplicity == 1, "multiplicity " + std::to_string(gap.multiplicity));
  out.check("spectral_gap", gap.gamma_hat < 0.9, "gamma_hat " + fmt(gap.gamma_hat));

  CsvTable sm({"key", "value"});
  sm.add({S("k"), D(static_cast<double>(o.k))});
  sm.add({S("density_iterations"), D(static_cast<double>(hd.iterations))});
  sm.add({S("density_residual"), D(hd.residual)});
  sm.add({S("density_l1_exact"), D(l1)});
  sm.add({S("h_bv"), D(hd.h_bv)});
  sm.add({S("inv_h_integral"), D(hd.inv_h_integral)});
  sm.add({S("max_row_correction"), D(L.max_correction)});
  sm.add({S("k_gap"), D(static_cast<double>(o.k_gap))});
  sm.add({S("lambda1"), D(gap.lambda1)});
  sm.add({S("gamma_hat"), D(gap.gamma_hat)});
  sm.add({S("multiplicity"), D(gap.multiplicity)});
  sm.add({S("peripheral"), D(gap.peripheral)});
  sm.add({S("non_mixing"), D(gap.non_mixing ? 1 : 0)});
  sm.add({S("approximate"), D(gap.approximate ? 1 : 0)});
  for (const auto& l : gap.log) res.messages.push_back(l);

  const InducedScheme s = load_or_build_scheme(cfg, map, res);
  if (!s.cells().empty()) {
    SchemeOperator so = scheme_operator(cfg, s);
    if (o.k_scheme <= o.export_limit) write_triplets(out, "operator_LF.csv", so.L.matrix);
    const UlamOperator P = conjugate_operator(so.L, so.density.h);
    const RenewalFamily fam = renewal_operators(P, s.max_tau());
    std::vector<std::complex<double>> zs{1.0};
    for (double t : o.theta) zs.push_back(std::polar(1.0, t));
    const RenewalCheck rc = renewal_spectrum_check(fam, zs);
    CsvTable rt({"theta", "z_re", "z_im", "sigma_min", "sigma_next", "flagged"});
    bool off_one_ok = true;
    for (std::size_t i = 0; i < rc.points.size(); ++i) {
      const auto& pt = rc.points[i];
      rt.add({D(i == 0 ? 0.0 : o.theta[i - 1]), D(pt.z.real()), D(pt.z.imag()), D(pt.sigma_min), D(pt.sigma_next),
              I(pt.flagged ? 1 : 0)});
      if (i > 0 && !(pt.sigma_min > 0.01)) off_one_ok = false;
    }
    out.csv("renewal.csv", rt);
    for (const auto& l : rc.log) res.messages.push_back(l);
    out.check("renewal_simple_at_one", rc.simple_at_one, "gamma at one " + fmt(rc.gamma_at_one));
    out.check("renewal_off_one", off_one_ok, "sigma_min > 0.01 at every theta");
    const bool complete = fam.completeness <= fam.truncation + 1e-12;
    out.check("renewal_completeness", complete,
              "||sum P_n - P|| " + fmt(fam.completeness) + " vs truncation " + fmt(fam.truncation));

    const std::size_t k_out = std::min<std::size_t>(o.k, 2048);
    const TowerMeasure tm = pushdown_measure(s, so.density.h, k_out);
    const std::vector<double> direct = (o.k % k_out == 0) ? coarsen(hd.h, k_out) : invariant_density(ulam_matrix(map, k_out)).h;
    CsvTable pd({"x", "pushed", "direct"});
    for (std::size_t i = 0; i < k_out; ++i)
      pd.add({D((static_cast<double>(i) + 0.5) / static_cast<double>(k_out)), D(tm.density[i]), D(direct[i])});
    out.csv("pushdown.csv", pd);
    const double push_l1 = l1_distance(tm.density, direct);

    const Observable phi0 = make_observable(cfg.stats.observable);
    double mean = 0;
    for (std::size_t i = 0; i < L.k; ++i) mean += phi0(L.midpoint(i)) * hd.h[i] / static_cast<double>(L.k);
    const WeightedObservable Phi = induced_observable(s, phi0.shifted(mean));
    const GordinResult g = gordin_solve(P, grid_values(so.L, s, Phi));
    out.check("gordin", g.residual <= 1e-8 * g.phi_hat_norm,
              "residual " + fmt(g.residual) + " vs norm " + fmt(g.phi_hat_norm));

    CsvTable tn({"p", "sup_sum", "var_sum", "tail_bound"});
    for (double p : {1.0, 2.0}) {
      const TailNormSums t = tail_norm_sums(s, p);
      tn.add({D(p), D(t.sup_sum), D(t.var_sum), D(t.tail_bound)});
    }
    out.csv("tail_norms.csv", tn);

    sm.add({S("k_scheme"), D(static_cast<double>(o.k_scheme))});
    sm.add({S("scheme_density_residual"), D(so.density.residual)});
    sm.add({S("scheme_max_row_correction"), D(so.L.max_correction)});
    sm.add({S("renewal_completeness"), D(fam.completeness)});
    sm.add({S("renewal_truncation"), D(fam.truncation)});
    sm.add({S("renewal_gamma_at_one"), D(rc.gamma_at_one)});
    sm.add({S("renewal_decay_slope"), D(rc.decay_slope)});
    sm.add({S("mean_tau"), D(tm.mean_tau)});
    sm.add({S("pushdown_l1"), D(push_l1)});
    sm.add({S("pushdown_dropped"), D(tm.dropped)});
    sm.add({S("gordin_observable_mean"), D(mean)});
    sm.add({S("gordin_residual"), D(g.residual)});
    sm.add({S("gordin_phi_hat_norm"), D(g.phi_hat_norm)});
    sm.add({S("gordin_koopman_residual"), D(g.koopman_residual)});
    sm.add({S("gordin_terms"), D(static_cast<double>(g.terms))});
  }
  out.csv("spectrum_summary.csv", sm);

  for (const auto& c : res.checks)
    if (!c.pass) res.exit_code = exit_check_failed;
}

// limits ---------------------------------------------------------------------

void cmd_limits(const ExperimentConfig& cfg, const PiecewiseMap& map, Output& out, RunResult& res) {
  const auto& st = cfg.stats;
  Ensemble e{map};
  e.N = st.N;
  e.n = st.n;
  e.burn_in = st.burn_in;
  e.seed = st.seed;
  e.threads = cfg.threads;

  const Observable phi = make_observable(st.observable);
  BirkhoffOptions bo;
  bo.acf_lags = st.acf_lags;
  const BirkhoffRun run = run_birkhoff(e, phi.components[0], bo);
  const CLTReport clt = clt_report(run, st.ks_threshold);
  CsvTable ct({"observable", "N", "n", "seed", "centering", "sigma2_gk", "sigma2_batch", "gk_tail", "ks",
               "ks_pvalue", "mean", "variance", "skewness", "kurtosis", "threshold", "degenerate", "verdict"});
  ct.add({S(st.observable), I(st.N), I(st.n), S(std::to_string(st.seed)), D(clt.centering), D(clt.sigma2_gk),
          D(clt.sigma2_batch), D(clt.gk_tail), D(clt.ks), D(clt.ks_pvalue), D(clt.moments.mean),
          D(clt.moments.variance), D(clt.moments.skewness), D(clt.moments.kurtosis), D(clt.threshold),
          I(clt.degenerate ? 1 : 0), S(clt.pass ? "pass" : "fail")});
  out.csv("clt.csv", ct);
  CsvTable acf({"lag", "autocovariance"});
  for (std::size_t j = 0; j < run.acf.size(); ++j) acf.add({I(j), D(run.acf[j])});
  out.csv("acf.csv", acf);
  out.check("clt", clt.pass, "KS " + fmt(clt.ks) + ", sigma2 " + fmt(clt.sigma2_gk));
  if (!clt.degenerate) {
    const double rel = std::abs(clt.sigma2_gk - clt.sigma2_batch) / clt.sigma2_gk;
    out.check("variance_consistency", rel < 0.15, "relative gap " + fmt(rel));
  }

  const FCLTReport fc = fclt_paths(run, clt.sigma2_gk, st.ks_threshold);
  CsvTable ft({"statistic", "reference", "ks", "threshold"});
  ft.add({S("W(1)"), S("normal(0,1)"), D(fc.ks_end), D(fc.threshold)});
  ft.add({S("max W"), S("2Phi(c)-1"), D(fc.ks_max), D(fc.threshold)});
  ft.add({S("integral W"), S("normal(0,1/3)"), D(fc.ks_integral), D(fc.threshold)});
  out.csv("fclt.csv", ft);
  if (!clt.degenerate) out.check("fclt", fc.pass, "KS max " + fmt(fc.ks_max));

  // decay of correlations
  const Observable v = make_observable(st.decay_observable);
  Ensemble de = e;
  de.N = st.decay_N;
  CorrelationOptions co;
  co.window = st.decay_window;
  const DecayReport dr = correlation(de, v.components[0], v.components[0], st.decay_n_max,
                                     CorrelationMethod::monte_carlo, co);
  const DecayFit fit = decay_fit(dr.rho, dr.noise_floor);
  std::optional<Envelope> env;
  if (st.envelope && !map.critical_set().empty()) {
    const InducedScheme s = load_or_build_scheme(cfg, map, res);
    const std::vector<double> h = scheme_density(cfg, s, res);
    const TauTail tt = tau_distribution(s, TauWeight::mu_Y, &h);
    env = theorem_envelope(tt.tail, dr.rho, dr.noise_floor, st.envelope_q, st.envelope_delta);
    out.check("decay_envelope", env->below, "C " + fmt(env->C));
  }
  CsvTable dt({"n", "rho", "stderr", "abs_rho", "noise_floor", "envelope", "C_envelope"});
  for (std::size_t n = 0; n < dr.rho.size(); ++n)
    dt.add({I(n), D(dr.rho[n]), D(dr.stderr_[n]), D(std::abs(dr.rho[n])), D(dr.noise_floor),
            D(env ? env->value[n] : NAN), D(env ? env->C * env->value[n] : NAN)});
  out.csv("decay.csv", dt);
  CsvTable df({"observable", "kind", "rate", "r2", "exp_rate", "exp_r2", "poly_beta", "poly_r2", "usable",
               "noise_floor", "samples", "envelope_C"});
  df.add({S(st.decay_observable), S(fit_kind_name(fit.kind)), D(fit.rate), D(fit.r2), D(fit.exp_rate), D(fit.exp_r2),
          D(fit.poly_beta), D(fit.poly_r2), I(fit.usable), D(dr.noise_floor), I(dr.samples), D(env ? env->C : NAN)});
  out.csv("decay_fit.csv", df);

  std::vector<PlotSeries> series;
  PlotSeries meas{"|rho(n)|", {}, {}, true};
  PlotSeries floor{"noise floor", {}, {}, false};
  PlotSeries fitted{"fit", {}, {}, false};
  PlotSeries envs{"C * envelope", {}, {}, false};
  for (std::size_t n = 0; n < dr.rho.size(); ++n) {
    const double x = static_cast<double>(n);
    meas.x.push_back(x);
    meas.y.push_back(std::abs(dr.rho[n]));
    floor.x.push_back(x);
    floor.y.push_back(dr.noise_floor);
    if (fit.kind == FitKind::exponential || fit.kind == FitKind::polynomial) {
      fitted.x.push_back(x);
      fitted.y.push_back(fit.kind == FitKind::exponential
                             ? std::exp(fit.exp_intercept - fit.exp_rate * x)
                             : (n ? std::exp(fit.poly_intercept) * std::pow(x, -fit.poly_beta) : NAN));
    }
    if (env) {
      envs.x.push_back(x);
      envs.y.push_back(env->C * env->value[n]);
    }
  }
  series.push_back(meas);
  series.push_back(floor);
  if (!fitted.x.empty()) series.push_back(fitted);
  if (env) series.push_back(envs);
  PlotSpec ps;
  ps.title = "Decay of correlations: " + map.name() + ", " + st.decay_observable;
  ps.x_label = "n";
  ps.y_label = "|rho(n)|";
  ps.log_y = true;
  char note[160];
  std::snprintf(note, sizeof note, "%s fit: rate %.4g, R^2 %.4f", fit_kind_name(fit.kind), fit.rate, fit.r2);
  ps.notes.push_back(note);
  out.write("decay.svg", svg_plot(ps, series));
  ps.log_x = true;
  ps.title += " (log-log)";
  out.write("decay_loglog.svg", svg_plot(ps, series));

  // large deviations of the centred observable
  Ensemble le = e;
  le.N = st.ld_N;
  const double c = run.mean;
  const ScalarFn f0 = phi.components[0];
  const LDReport ld = large_deviation(le, [f0, c](double x) { return f0(x) - c; }, st.ld_epsilon, st.ld_grid);
  CsvTable lt({"n", "count", "probability", "upper_bound"});
  for (std::size_t i = 0; i < ld.n.size(); ++i) lt.add({I(ld.n[i]), I(ld.count[i]), D(ld.prob[i]), D(ld.upper[i])});
  out.csv("ld.csv", lt);
  CsvTable lf({"epsilon", "samples", "exp_slope", "loglog_slope", "at_least_linear"});
  lf.add({D(ld.epsilon), I(ld.samples), D(ld.exp_slope), D(ld.loglog_slope), I(ld.at_least_linear ? 1 : 0)});
  out.csv("ld_fit.csv", lf);
  PlotSpec lp;
  lp.title = "Large deviations: " + map.name() + ", epsilon " + fmt(st.ld_epsilon);
  lp.x_label = "n";
  lp.y_label = "P(|S_n| >= eps n)";
  lp.log_y = true;
  PlotSeries lpts{"empirical", {}, {}, true}, lup{"upper bound", {}, {}, false};
  for (std::size_t i = 0; i < ld.n.size(); ++i) {
    lpts.x.push_back(static_cast<double>(ld.n[i]));
    lpts.y.push_back(ld.prob[i]);
    lup.x.push_back(static_cast<double>(ld.n[i]));
    lup.y.push_back(ld.upper[i]);
  }
  out.write("ld.svg", svg_plot(lp, {lpts, lup}));

  for (const auto& ch : res.checks)
    if (!ch.pass) res.exit_code = exit_check_failed;
}

void write_manifest(const ExperimentConfig& cfg, std::string_view command, Output& out, RunResult& res,
                    double seconds) {
  std::ostringstream m;
  m << "command: " << command << "\n";
  m << "config: " << cfg.source << "\n";
  m << "config_hash: " << hex64(cfg.hash()) << "\n";
  m << "ergolab_version: " << kVersion << "\n";
  m << "eigen_version: " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION << "\n";
  m << "compiler: " << __VERSION__ << "\n";
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", seconds);
  m << "wall_clock_seconds: " << wall << "\n";
  m << "exit_code: " << res.exit_code << "\n";
  m << "files:\n";
  for (std::size_t i = 0; i < res.files.size(); ++i) m << "  " << res.files[i] << " fnv1a64=" << out.hashes()[i] << "\n";
  m << "checks:\n";
  for (const auto& c : res.checks) m << "  " << c.name << ": " << (c.pass ? "pass" : "fail") << " (" << c.detail << ")\n";
  if (!res.messages.empty()) {
    m << "messages:\n";
    for (const auto& s : res.messages) m << "  " << s << "\n";
  }
  const std::string name = "manifest-" + std::string(command) + ".txt";
  res.files.push_back(name);
  write_file_atomic((fs::path(out.dir()) / name).string(), m.str());
}

}  // namespace

RunResult run_command(std::string_view command, const ExperimentConfig& cfg) {
  RunResult res;
  const auto t0 = std::chrono::steady_clock::now();
  Output out(cfg, res);
  try {
    const PiecewiseMap map = build_map(cfg);
    if (command == "analyze-map")
      cmd_analyze_map(cfg, map, out, res);
    else if (command == "induce")
      cmd_induce(cfg, map, out, res);
    else if (command == "spectrum")
      cmd_spectrum(cfg, map, out, res);
    else if (command == "limits")
      cmd_limits(cfg, map, out, res);
    else
      fail(ErrorCode::invalid_argument, "unknown command '" + std::string(command) + "'");
  } catch (const Error& e) {
    res.exit_code = exit_validation;
    res.messages.push_back(e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg, command, out, res, secs);
  return res;
}

}  // namespace ergolab
