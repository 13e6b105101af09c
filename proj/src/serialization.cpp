#include "chebtt/serialization.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace chebtt {
namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kDenseMagic[8] = {'C', 'H', 'E', 'B', 'F', 'U', 'L', 'L'};
constexpr char kTrainMagic[8] = {'C', 'H', 'E', 'B', 'T', 'T', 'E', 'N'};
constexpr int kMaxDimension = 64;  // header sanity bound, far above any real use

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string data, std::string context) : data_(std::move(data)), ctx_(std::move(context)) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  unsigned char u8() { return byte(); }
  void expect_magic(const char (&magic)[8]) {
    for (char c : magic) {
      if (byte() != static_cast<unsigned char>(c)) throw BuildError(ctx_ + ": bad magic");
    }
  }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
  void expect_exhausted() const {
    if (pos_ != data_.size()) throw BuildError(ctx_ + ": trailing bytes");
  }
  [[nodiscard]] const std::string& context() const { return ctx_; }

 private:
  unsigned char byte() {
    if (pos_ >= data_.size()) throw BuildError(ctx_ + ": truncated file");
    return static_cast<unsigned char>(data_[pos_++]);
  }
  std::string data_;
  std::string ctx_;
  std::size_t pos_ = 0;
};

void write_file(const std::filesystem::path& file, const std::string& bytes) {
  if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw BuildError("cannot write " + file.string());
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw BuildError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw BuildError("cannot read " + file.string());
  return std::move(buf).str();
}

Json axes_json(const ChebyshevGrid<double>& g, bool with_counts) {
  Json axes = Json::array();
  for (int k = 0; k < g.dim(); ++k) {
    Json a;
    a["lo"] = g.interval(k).lo;
    a["hi"] = g.interval(k).hi;
    if (with_counts) a["count"] = static_cast<std::uint64_t>(g.count(k));
    axes.push_back(std::move(a));
  }
  return axes;
}

std::vector<double> doubles_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(std::string(what) + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Eigen::MatrixXd matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols,
                            const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError(std::string(what) + ": expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = doubles_from(j[static_cast<std::size_t>(i)], what);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(std::string(what) + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

Json matrix_to(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc()) throw BuildError("format_double: conversion failed");
  return std::string(buf.data(), res.ptr);
}

void save_json(const std::filesystem::path& file, const Json& j) {
  write_file(file, j.dump(2) + "\n");
}

Json load_json(const std::filesystem::path& file) {
  const std::string text = read_file(file);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw BuildError("cannot parse JSON in " + file.string());
  return j;
}

void save_dense_tensor(const std::filesystem::path& file, const ChebyshevTensor<double>& t) {
  const auto& g = t.grid();
  std::string buf;
  buf.append(kDenseMagic, sizeof(kDenseMagic));
  put_u32(buf, kFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(g.dim()));
  for (int k = 0; k < g.dim(); ++k) {
    put_f64(buf, g.interval(k).lo);
    put_f64(buf, g.interval(k).hi);
    put_u64(buf, static_cast<std::uint64_t>(g.count(k)));
  }
  put_u64(buf, static_cast<std::uint64_t>(t.values().size()));
  for (Eigen::Index q = 0; q < t.values().size(); ++q) put_f64(buf, t.values()[q]);
  write_file(file, buf);

  Json side;
  side["format"] = "CHEBFULL";
  side["version"] = kFormatVersion;
  side["dimension"] = g.dim();
  side["axes"] = axes_json(g, true);
  side["value_count"] = static_cast<std::uint64_t>(t.values().size());
  side["layout"] = "row-major, last dimension fastest";
  side["byte_order"] = "little-endian";
  save_json(file.string() + ".json", side);
}

ChebyshevTensor<double> load_dense_tensor(const std::filesystem::path& file) {
  Reader r(read_file(file), "load_dense_tensor(" + file.string() + ")");
  r.expect_magic(kDenseMagic);
  if (r.u32() != kFormatVersion) throw BuildError(r.context() + ": unsupported version");
  const auto d = r.u32();
  if (d < 1 || d > kMaxDimension) throw BuildError(r.context() + ": implausible dimension");

  std::vector<Interval<double>> intervals;
  std::vector<Index> counts;
  std::uint64_t expected = 1;
  for (std::uint32_t k = 0; k < d; ++k) {
    const double lo = r.f64();
    const double hi = r.f64();
    const std::uint64_t n = r.u64();
    if (n < 2 || n > (std::uint64_t{1} << 20)) {
      throw BuildError(r.context() + ": implausible node count");
    }
    intervals.emplace_back(lo, hi);
    counts.push_back(static_cast<Index>(n));
    expected *= n;
  }
  const std::uint64_t total = r.u64();
  if (total != expected || r.remaining() != total * 8) {
    throw BuildError(r.context() + ": value count does not match the grid");
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(total));
  for (std::uint64_t q = 0; q < total; ++q) values[static_cast<Eigen::Index>(q)] = r.f64();
  r.expect_exhausted();
  return ChebyshevTensor<double>(ChebyshevGrid<double>(std::move(intervals), std::move(counts)),
                                 std::move(values));
}

void save_tensor_train(const std::filesystem::path& file, const TensorTrain<double>& t) {
  std::string buf;
  buf.append(kTrainMagic, sizeof(kTrainMagic));
  put_u32(buf, kFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(t.dim()));
  for (int i = 0; i < t.dim(); ++i) put_u64(buf, static_cast<std::uint64_t>(t.mode_size(i)));
  for (const Index rk : t.ranks()) put_u64(buf, static_cast<std::uint64_t>(rk));
  buf.push_back(t.grid ? char(1) : char(0));
  if (t.grid) {
    for (int k = 0; k < t.grid->dim(); ++k) {
      put_f64(buf, t.grid->interval(k).lo);
      put_f64(buf, t.grid->interval(k).hi);
    }
  }
  std::uint64_t value_count = 0;
  for (int i = 0; i < t.dim(); ++i) {
    const auto& m = t.core(i).m;
    for (Eigen::Index q = 0; q < m.size(); ++q) put_f64(buf, m.data()[q]);
    value_count += static_cast<std::uint64_t>(m.size());
  }
  write_file(file, buf);

  Json side;
  side["format"] = "CHEBTTEN";
  side["version"] = kFormatVersion;
  side["dimension"] = t.dim();
  const auto modes = t.mode_sizes();
  const auto ranks = t.ranks();
  side["mode_sizes"] = std::vector<std::uint64_t>(modes.begin(), modes.end());
  side["ranks"] = std::vector<std::uint64_t>(ranks.begin(), ranks.end());
  side["grid"] = t.grid ? axes_json(*t.grid, false) : Json(nullptr);
  side["value_count"] = value_count;
  side["layout"] = "cores in order, each left unfolding column-major";
  side["byte_order"] = "little-endian";
  save_json(file.string() + ".json", side);
}

TensorTrain<double> load_tensor_train(const std::filesystem::path& file) {
  Reader r(read_file(file), "load_tensor_train(" + file.string() + ")");
  r.expect_magic(kTrainMagic);
  if (r.u32() != kFormatVersion) throw BuildError(r.context() + ": unsupported version");
  const auto d = r.u32();
  if (d < 1 || d > kMaxDimension) throw BuildError(r.context() + ": implausible dimension");

  std::vector<Index> modes(d), ranks(d + 1);
  for (auto& n : modes) {
    const std::uint64_t v = r.u64();
    if (v < 1 || v > (std::uint64_t{1} << 20)) throw BuildError(r.context() + ": implausible mode size");
    n = static_cast<Index>(v);
  }
  for (auto& rk : ranks) {
    const std::uint64_t v = r.u64();
    if (v < 1 || v > (std::uint64_t{1} << 20)) throw BuildError(r.context() + ": implausible rank");
    rk = static_cast<Index>(v);
  }

  const unsigned char flag = r.u8();
  if (flag > 1) throw BuildError(r.context() + ": bad grid flag");
  std::optional<ChebyshevGrid<double>> grid;
  if (flag == 1) {
    std::vector<Interval<double>> intervals;
    for (std::uint32_t k = 0; k < d; ++k) {
      const double lo = r.f64();
      const double hi = r.f64();
      intervals.emplace_back(lo, hi);
    }
    grid.emplace(std::move(intervals), std::vector<Index>(modes));
  }

  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < d; ++i) {
    total += static_cast<std::uint64_t>(ranks[i]) * static_cast<std::uint64_t>(modes[i]) *
             static_cast<std::uint64_t>(ranks[i + 1]);
  }
  if (r.remaining() != total * 8) {
    throw BuildError(r.context() + ": core payload does not match the header");
  }
  std::vector<TTCore<double>> cores;
  cores.reserve(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    Eigen::MatrixXd m(ranks[i] * modes[i], ranks[i + 1]);
    for (Eigen::Index q = 0; q < m.size(); ++q) m.data()[q] = r.f64();
    cores.emplace_back(std::move(m), modes[i]);
  }
  r.expect_exhausted();
  TensorTrain<double> t(std::move(cores));
  t.grid = std::move(grid);
  return t;
}

Json spec_to_json(const SurfaceSpec& spec) {
  Json j;
  j["maturities"] = spec.maturities;
  j["strikes"] = spec.strikes;
  return j;
}

SurfaceSpec spec_from_json(const Json& j) {
  SurfaceSpec spec;
  spec.maturities = doubles_from(j.at("maturities"), "maturities");
  spec.strikes = doubles_from(j.at("strikes"), "strikes");
  spec.validate();
  return spec;
}

Json surface_to_json(const VolSurface& s) {
  Json j = spec_to_json(s.spec);
  j["quotes"] = matrix_to(s.quotes);
  j["weights"] = matrix_to(s.weights);
  Json valid = Json::array();
  for (Eigen::Index i = 0; i < s.valid.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < s.valid.cols(); ++c) row.push_back(bool(s.valid(i, c)));
    valid.push_back(std::move(row));
  }
  j["valid"] = std::move(valid);
  return j;
}

VolSurface surface_from_json(const Json& j) {
  VolSurface s = VolSurface::with_spec(spec_from_json(j));
  const auto rows = s.quotes.rows();
  const auto cols = s.quotes.cols();
  s.quotes = matrix_from(j.at("quotes"), rows, cols, "quotes");
  s.weights = matrix_from(j.at("weights"), rows, cols, "weights");
  const Json& valid = j.at("valid");
  if (!valid.is_array() || static_cast<Eigen::Index>(valid.size()) != rows) {
    throw ConfigError("valid: expected one row per maturity");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = valid[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("valid: ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_boolean()) throw ConfigError("valid: expected booleans");
      s.valid(i, c) = cell.get<bool>();
    }
  }
  s.validate();
  return s;
}

Json params_to_json(const RoughBergomiParams& p) {
  Json j;
  Json xi;
  xi["times"] = p.xi.times;
  xi["values"] = p.xi.values;
  j["xi"] = std::move(xi);
  j["eta"] = p.eta;
  j["rho"] = p.rho;
  j["hurst"] = p.hurst;
  return j;
}

RoughBergomiParams params_from_json(const Json& j) {
  RoughBergomiParams p;
  const Json& xi = j.at("xi");
  p.xi.times = doubles_from(xi.at("times"), "xi.times");
  p.xi.values = doubles_from(xi.at("values"), "xi.values");
  p.eta = j.at("eta").get<double>();
  p.rho = j.at("rho").get<double>();
  p.hurst = j.at("hurst").get<double>();
  p.validate();
  return p;
}

Json mc_config_to_json(const MCConfig& mc) {
  Json j;
  j["paths"] = mc.paths;
  j["time_steps_per_year"] = mc.time_steps_per_year;
  j["rng_seed"] = mc.rng_seed;
  j["scheme"] = mc.scheme == Scheme::kHybrid ? "hybrid" : "exact-cholesky";
  j["estimator"] = mc.estimator == Estimator::kConditionalBS ? "conditional-bs" : "terminal-payoff";
  j["antithetic"] = mc.antithetic;
  j["itm_put_parity"] = mc.itm_put_parity;
  return j;
}

MCConfig mc_config_from_json(const Json& j) {
  MCConfig mc;
  mc.paths = j.at("paths").get<std::int64_t>();
  mc.time_steps_per_year = j.at("time_steps_per_year").get<int>();
  mc.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const std::string scheme = j.at("scheme").get<std::string>();
  if (scheme == "hybrid") {
    mc.scheme = Scheme::kHybrid;
  } else if (scheme == "exact-cholesky") {
    mc.scheme = Scheme::kExactCholesky;
  } else {
    throw ConfigError("mc_config: unknown scheme \"" + scheme + "\"");
  }
  const std::string estimator = j.at("estimator").get<std::string>();
  if (estimator == "conditional-bs") {
    mc.estimator = Estimator::kConditionalBS;
  } else if (estimator == "terminal-payoff") {
    mc.estimator = Estimator::kTerminalPayoff;
  } else {
    throw ConfigError("mc_config: unknown estimator \"" + estimator + "\"");
  }
  mc.antithetic = j.at("antithetic").get<bool>();
  mc.itm_put_parity = j.at("itm_put_parity").get<bool>();
  mc.validate();
  return mc;
}

Json calibration_to_json(const CalibrationResult& r) {
  Json j;
  j["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
  j["theta_star"] = r.theta_star ? params_to_json(*r.theta_star) : Json(nullptr);
  j["final_loss"] = r.final_loss;
  j["rmse"] = r.rmse;
  j["loss_trajectory"] = r.loss_trajectory;
  j["iterations"] = r.iterations;
  j["termination"] = r.termination;
  j["surrogate_calls"] = r.surrogate_calls;
  j["pricer_calls"] = r.pricer_calls;
  j["out_of_box_probes"] = r.out_of_box_probes;
  return j;
}

void write_surface_csv(const std::filesystem::path& file, const VolSurface& s) {
  s.validate();
  std::string text = "maturity";
  for (const double k : s.spec.strikes) text += "," + format_double(k);
  text += "\n";
  for (Eigen::Index i = 0; i < s.quotes.rows(); ++i) {
    text += format_double(s.spec.maturities[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < s.quotes.cols(); ++j) {
      text += ",";
      if (s.valid(i, j)) text += format_double(s.quotes(i, j));
    }
    text += "\n";
  }
  write_file(file, text);
}

VolSurface read_surface_csv(const std::filesystem::path& file) {
  const std::string text = read_file(file);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw BuildError("read_surface_csv: empty file " + file.string());

  auto split = [](const std::string& row) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = row.find(',', start);
      out.push_back(row.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  };
  auto parse = [&](const std::string& field) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
      throw BuildError("read_surface_csv: bad number \"" + field + "\" in " + file.string());
    }
    return v;
  };

  const auto header = split(line);
  if (header.empty() || header[0] != "maturity") {
    throw BuildError("read_surface_csv: missing header in " + file.string());
  }
  SurfaceSpec spec;
  for (std::size_t c = 1; c < header.size(); ++c) spec.strikes.push_back(parse(header[c]));

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw BuildError("read_surface_csv: ragged row in " + file.string());
    }
    spec.maturities.push_back(parse(fields[0]));
    rows.push_back(std::move(fields));
  }

  VolSurface s = VolSurface::with_spec(std::move(spec));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 1; j < rows[i].size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j - 1);
      if (rows[i][j].empty()) {
        s.valid(ii, jj) = false;
      } else {
        s.quotes(ii, jj) = parse(rows[i][j]);
        if (!(s.quotes(ii, jj) > 0.0)) {
          s.quotes(ii, jj) = 0.0;
          s.valid(ii, jj) = false;
        }
      }
    }
  }
  s.validate();
  return s;
}

void write_heatmap_csv(const std::filesystem::path& file, const SurfaceSpec& spec,
                       const Eigen::MatrixXd& cells) {
  spec.validate();
  if (cells.rows() != static_cast<Eigen::Index>(spec.maturities.size()) ||
      cells.cols() != static_cast<Eigen::Index>(spec.strikes.size())) {
    throw ConfigError("write_heatmap_csv: matrix shape must match the spec grid");
  }
  std::string text = "maturity";
  for (const double k : spec.strikes) text += "," + format_double(k);
  text += "\n";
  for (Eigen::Index i = 0; i < cells.rows(); ++i) {
    text += format_double(spec.maturities[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < cells.cols(); ++j) text += "," + format_double(cells(i, j));
    text += "\n";
  }
  write_file(file, text);
}

}  // namespace chebtt
