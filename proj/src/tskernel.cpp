#include "flarecast/tskernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "flarecast/error.hpp"
#include "flarecast/hash.hpp"
#include "flarecast/rng.hpp"
#include "flarecast/text.hpp"
#include "flarecast/threading.hpp"

namespace flarecast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b) + exp(c)) without overflow; tolerates -inf arguments.
double logsumexp3(double a, double b, double c) {
  const double m = std::max(a, std::max(b, c));
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m));
}

void check_same_dimension(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ComputeError("series dimension mismatch: " + std::to_string(a.rows()) +
                       " vs " + std::to_string(b.rows()) + " parameters");
  }
  if (a.cols() == 0 || b.cols() == 0) {
    throw ComputeError("series must have at least one timestep");
  }
}

void check_band(std::optional<int> band, std::size_t t1, std::size_t t2) {
  if (!band) return;
  if (*band < 0) throw ConfigError("band_width must be >= 0");
  const auto diff = t1 > t2 ? t1 - t2 : t2 - t1;
  if (static_cast<std::size_t>(*band) < diff) {
    throw ConfigError("band_width " + std::to_string(*band) +
                      " admits no alignment path for lengths " + std::to_string(t1) +
                      " and " + std::to_string(t2));
  }
}

bool in_band(std::optional<int> band, std::size_t i, std::size_t j) {
  if (!band) return true;
  const auto diff = i > j ? i - j : j - i;
  return diff <= static_cast<std::size_t>(*band);
}

}  // namespace

std::string kernel_kind_name(KernelKind kind) {
  return kind == KernelKind::Gak ? "gak" : "dtw_rbf";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "gak") return KernelKind::Gak;
  if (name == "dtw_rbf") return KernelKind::DtwRbf;
  throw ConfigError("unknown kernel kind '" + name + "' (expected gak or dtw_rbf)");
}

void KernelConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("kernel gamma must be > 0");
  if (band_width && *band_width < 0) throw ConfigError("band_width must be >= 0");
}

double KernelConfig::sigma() const { return std::sqrt(1.0 / (2.0 * gamma)); }

std::string KernelConfig::fingerprint() const {
  Fnv1a h;
  h.update(kernel_kind_name(kind));
  h.update(rng::double_bits(gamma));
  h.update(normalize ? std::uint64_t{1} : std::uint64_t{0});
  h.update(band_width ? static_cast<std::uint64_t>(*band_width + 1) : std::uint64_t{0});
  return "kernel-" + h.hex();
}

double frame_sqdist(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double acc = 0.0;
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double d = a(p, i) - b(p, j);
    acc += d * d;
  }
  return acc;
}

double dtw(const Matrix& a, const Matrix& b, std::optional<int> band) {
  check_same_dimension(a, b);
  const std::size_t t1 = a.cols();
  const std::size_t t2 = b.cols();
  check_band(band, t1, t2);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Two rolling rows of the (t1+1) x (t2+1) cost table.
  std::vector<double> prev(t2 + 1, kInf);
  std::vector<double> curr(t2 + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= t1; ++i) {
    std::fill(curr.begin(), curr.end(), kInf);
    for (std::size_t j = 1; j <= t2; ++j) {
      if (!in_band(band, i - 1, j - 1)) continue;
      const double best = std::min(prev[j], std::min(curr[j - 1], prev[j - 1]));
      curr[j] = frame_sqdist(a, i - 1, b, j - 1) + best;
    }
    std::swap(prev, curr);
  }
  const double total = prev[t2];
  if (!std::isfinite(total)) throw ComputeError("dtw produced a nonfinite cost");
  return std::sqrt(total);
}

double gak_log(const Matrix& a, const Matrix& b, double sigma, std::optional<int> band) {
  check_same_dimension(a, b);
  if (!(sigma > 0.0)) throw ConfigError("gak sigma must be > 0");
  const std::size_t t1 = a.cols();
  const std::size_t t2 = b.cols();
  check_band(band, t1, t2);

  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  // logM over a (t1+1) x (t2+1) table with logM[0][0] = 0, first row and
  // column -inf. Rolling rows keep memory at O(t2).
  std::vector<double> prev(t2 + 1, kNegInf);
  std::vector<double> curr(t2 + 1, kNegInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= t1; ++i) {
    std::fill(curr.begin(), curr.end(), kNegInf);
    for (std::size_t j = 1; j <= t2; ++j) {
      if (!in_band(band, i - 1, j - 1)) continue;
      const double u = -frame_sqdist(a, i - 1, b, j - 1) * inv_two_sigma_sq;
      // kappa = e^u / (2 - e^u); log(2 - e^u) = log1p(-expm1(u)) keeps full
      // precision for u near 0.
      const double log_kappa = u - std::log1p(-std::expm1(u));
      const double from = logsumexp3(prev[j], curr[j - 1], prev[j - 1]);
      if (from != kNegInf) curr[j] = from + log_kappa;
    }
    std::swap(prev, curr);
  }
  const double result = prev[t2];
  if (!std::isfinite(result)) {
    throw ComputeError("gak produced a nonfinite log kernel value");
  }
  return result;
}

double gak(const Matrix& a, const Matrix& b, double sigma, std::optional<int> band) {
  return std::exp(gak_log(a, b, sigma, band));
}

double kernel_value(const MvtsInstance& x, const MvtsInstance& y, const KernelConfig& config) {
  config.validate();
  if (config.kind == KernelKind::DtwRbf) {
    const double d = dtw(x.values, y.values, config.band_width);
    return std::exp(-config.gamma * d * d);
  }
  const double s = config.sigma();
  const double lxy = gak_log(x.values, y.values, s, config.band_width);
  if (!config.normalize) return std::exp(lxy);
  const double lxx = gak_log(x.values, x.values, s, config.band_width);
  const double lyy = gak_log(y.values, y.values, s, config.band_width);
  return std::exp(lxy - 0.5 * (lxx + lyy));
}

namespace {

// Per-instance log self-similarity, used to normalize GAK cells without
// recomputing the diagonal for every pair.
std::vector<double> self_log_gak(const Dataset& d, const KernelConfig& config, int threads) {
  std::vector<double> out(d.size(), 0.0);
  const double s = config.sigma();
  parallel_for(d.size(), threads, [&](std::size_t i) {
    out[i] = gak_log(d.instances()[i].values, d.instances()[i].values, s, config.band_width);
  });
  return out;
}

double cell_value(const MvtsInstance& x, const MvtsInstance& y, const KernelConfig& config,
                  double self_log_x, double self_log_y) {
  if (config.kind == KernelKind::DtwRbf) {
    const double d = dtw(x.values, y.values, config.band_width);
    return std::exp(-config.gamma * d * d);
  }
  const double lxy = gak_log(x.values, y.values, config.sigma(), config.band_width);
  if (!config.normalize) return std::exp(lxy);
  return std::exp(lxy - 0.5 * (self_log_x + self_log_y));
}

}  // namespace

GramMatrix gram(const Dataset& rows, const Dataset& cols, const KernelConfig& config,
                int threads) {
  config.validate();
  if (rows.size() == 0 || cols.size() == 0) {
    throw ConfigError("gram requires nonempty row and column datasets");
  }
  if (rows.param_names() != cols.param_names()) {
    throw ConfigError("gram row and column datasets disagree on parameters");
  }

  GramMatrix g;
  g.rows = rows.size();
  g.cols = cols.size();
  g.row_fingerprint = dataset_fingerprint(rows);
  g.col_fingerprint = dataset_fingerprint(cols);
  g.kernel_fingerprint = config.fingerprint();
  g.values.assign(g.rows * g.cols, 0.0);

  const bool needs_self = config.kind == KernelKind::Gak && config.normalize;
  std::vector<double> row_self;
  std::vector<double> col_self;
  if (needs_self) {
    row_self = self_log_gak(rows, config, threads);
    col_self = g.row_fingerprint == g.col_fingerprint ? row_self
                                                      : self_log_gak(cols, config, threads);
  } else {
    row_self.assign(rows.size(), 0.0);
    col_self.assign(cols.size(), 0.0);
  }

  parallel_for(g.rows * g.cols, threads, [&](std::size_t k) {
    const std::size_t i = k / g.cols;
    const std::size_t j = k % g.cols;
    g.values[k] = cell_value(rows.instances()[i], cols.instances()[j], config, row_self[i],
                             col_self[j]);
  });
  return g;
}

GramMatrix gram_self(const Dataset& data, const KernelConfig& config, int threads) {
  config.validate();
  if (data.size() == 0) throw ConfigError("gram requires a nonempty dataset");

  GramMatrix g;
  g.rows = data.size();
  g.cols = data.size();
  g.row_fingerprint = dataset_fingerprint(data);
  g.col_fingerprint = g.row_fingerprint;
  g.kernel_fingerprint = config.fingerprint();
  g.values.assign(g.rows * g.cols, 0.0);

  const bool needs_self = config.kind == KernelKind::Gak && config.normalize;
  std::vector<double> self_log(data.size(), 0.0);
  if (needs_self) self_log = self_log_gak(data, config, threads);

  // Upper triangle including the diagonal, mirrored afterwards so each pair is
  // evaluated exactly once.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
  cells.reserve(g.rows * (g.rows + 1) / 2);
  for (std::size_t i = 0; i < g.rows; ++i) {
    for (std::size_t j = i; j < g.cols; ++j) {
      cells.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }
  }
  parallel_for(cells.size(), threads, [&](std::size_t k) {
    const std::size_t i = cells[k].first;
    const std::size_t j = cells[k].second;
    const double v = cell_value(data.instances()[i], data.instances()[j], config, self_log[i],
                                self_log[j]);
    g.values[i * g.cols + j] = v;
    g.values[j * g.cols + i] = v;
  });
  return g;
}

namespace {

constexpr char kGramMagic[8] = {'F', 'C', 'G', 'R', 'A', 'M', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1u << 20)) throw ComputeError("gram cache header string too large");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

void save_gram(const GramMatrix& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputeError("cannot open gram cache for writing: " + path.string());
  out.write(kGramMagic, sizeof(kGramMagic));
  write_u64(out, g.rows);
  write_u64(out, g.cols);
  write_string(out, g.row_fingerprint);
  write_string(out, g.col_fingerprint);
  write_string(out, g.kernel_fingerprint);
  for (double v : g.values) write_u64(out, rng::double_bits(v));
  if (!out) throw ComputeError("failed writing gram cache: " + path.string());
}

GramMatrix load_gram(const std::filesystem::path& path, const std::string& row_fingerprint,
                     const std::string& col_fingerprint,
                     const std::string& kernel_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ComputeError("cannot open gram cache: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kGramMagic, sizeof(magic)) != 0) {
    throw ComputeError("not a gram cache file: " + path.string());
  }
  GramMatrix g;
  g.rows = read_u64(in);
  g.cols = read_u64(in);
  g.row_fingerprint = read_string(in);
  g.col_fingerprint = read_string(in);
  g.kernel_fingerprint = read_string(in);
  if (g.row_fingerprint != row_fingerprint || g.col_fingerprint != col_fingerprint ||
      g.kernel_fingerprint != kernel_fingerprint) {
    throw ComputeError("gram cache fingerprint mismatch: " + path.string());
  }
  g.values.resize(g.rows * g.cols);
  for (double& v : g.values) {
    const std::uint64_t bits = read_u64(in);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    v = d;
  }
  if (!in) throw ComputeError("truncated gram cache: " + path.string());
  return g;
}

}  // namespace flarecast
