#ifndef LGCP_IO_CSV_HPP
#define LGCP_IO_CSV_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lgcp/error.hpp"
#include "lgcp/grid.hpp"
#include "lgcp/io/config.hpp"
#include "lgcp/mcmc.hpp"
#include "lgcp/raster.hpp"

namespace lgcp::io {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Point patterns

/// CSV with header x,y and optional mark and t columns; %.17g keeps every
/// coordinate exact on re-reading.
inline std::string pattern_to_csv(const PointPattern& p) {
  std::ostringstream os;
  os << "x,y";
  if (p.marked()) os << ",mark";
  if (p.timed()) os << ",t";
  os << "\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << lgcp::detail::fmt17(p.x[i]) << ',' << lgcp::detail::fmt17(p.y[i]);
    if (p.marked()) os << ',' << p.marks[i];
    if (p.timed()) os << ',' << lgcp::detail::fmt17(p.times[i]);
    os << "\n";
  }
  return os.str();
}

/// Parse a pattern; errors name the 1-based line. The window is not stored
/// in the file and must be supplied.
inline PointPattern parse_pattern_csv(const std::string& text, const Window& window,
                                      const std::string& source = "pattern") {
  PointPattern p;
  p.window = window;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  int col_mark = -1, col_t = -1;
  std::size_t ncols = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    const std::string ctx = source + ": line " + std::to_string(lineno);
    if (!header) {
      if (cells.size() < 2 || cells[0] != "x" || cells[1] != "y")
        throw InvalidInput(ctx + ": header must start with x,y");
      for (std::size_t c = 2; c < cells.size(); ++c) {
        if (cells[c] == "mark") col_mark = static_cast<int>(c);
        else if (cells[c] == "t") col_t = static_cast<int>(c);
        else throw InvalidInput(ctx + ": unknown column '" + cells[c] + "'");
      }
      ncols = cells.size();
      header = true;
      continue;
    }
    if (cells.size() != ncols)
      throw InvalidInput(ctx + ": expected " + std::to_string(ncols) + " fields, found " +
                         std::to_string(cells.size()));
    const double x = detail::parse_real(cells[0], ctx);
    const double y = detail::parse_real(cells[1], ctx);
    if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidInput(ctx + ": non-finite coordinate");
    p.add(x, y);
    if (col_mark >= 0) {
      const long long m = detail::parse_integer(cells[static_cast<std::size_t>(col_mark)], ctx);
      if (m < 1) throw InvalidInput(ctx + ": marks must be integers >= 1");
      p.marks.push_back(static_cast<int>(m));
    }
    if (col_t >= 0) p.times.push_back(detail::parse_real(cells[static_cast<std::size_t>(col_t)], ctx));
  }
  if (!header) throw InvalidInput(source + ": empty file (no header)");
  return p;
}

inline PointPattern read_pattern_csv(const std::string& path, const Window& window) {
  return parse_pattern_csv(read_file(path), window, path);
}

// ---------------------------------------------------------------------------
// Region counts

/// region_id,count rows; returns totals indexed by id - 1. Ids must be
/// 1..m, each listed once.
inline std::vector<long> parse_region_counts(const std::string& text,
                                             const std::string& source = "counts") {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  std::map<long long, long> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    const std::string ctx = source + ": line " + std::to_string(lineno);
    if (!header) {
      if (cells.size() != 2 || cells[0] != "region_id" || cells[1] != "count")
        throw InvalidInput(ctx + ": header must be region_id,count");
      header = true;
      continue;
    }
    if (cells.size() != 2) throw InvalidInput(ctx + ": expected 2 fields");
    const long long id = detail::parse_integer(cells[0], ctx);
    const long long n = detail::parse_integer(cells[1], ctx);
    if (id < 1) throw InvalidInput(ctx + ": region ids start at 1");
    if (n < 0) throw InvalidInput(ctx + ": negative count");
    if (!rows.emplace(id, static_cast<long>(n)).second)
      throw InvalidInput(ctx + ": region " + std::to_string(id) + " listed twice");
  }
  if (!header) throw InvalidInput(source + ": empty file (no header)");
  std::vector<long> totals(rows.size());
  for (const auto& [id, n] : rows) {
    if (id > static_cast<long long>(rows.size()))
      throw InvalidInput(source + ": region ids must run 1.." + std::to_string(rows.size()));
    totals[static_cast<std::size_t>(id - 1)] = n;
  }
  return totals;
}

inline std::string region_counts_to_csv(const std::vector<long>& totals) {
  std::ostringstream os;
  os << "region_id,count\n";
  for (std::size_t r = 0; r < totals.size(); ++r) os << r + 1 << ',' << totals[r] << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Chains

struct ChainColumns {
  std::vector<std::string> beta_names;  // column names after logpost
  std::vector<std::string> theta_names;
};

inline ChainColumns chain_columns(Eigen::Index n_beta, Eigen::Index n_cov_blocks,
                                  const std::vector<std::string>& covariate_names = {},
                                  bool multitype = false) {
  ChainColumns c;
  for (Eigen::Index j = 0; j < n_beta; ++j) {
    if (n_beta == 1) c.beta_names.push_back("beta");
    else if (multitype) c.beta_names.push_back("beta_" + std::to_string(j + 1));
    else if (j == 0) c.beta_names.push_back("beta_0");
    else if (static_cast<std::size_t>(j - 1) < covariate_names.size())
      c.beta_names.push_back("beta_" + covariate_names[static_cast<std::size_t>(j - 1)]);
    else c.beta_names.push_back("beta_" + std::to_string(j));
  }
  for (Eigen::Index j = 0; j < n_cov_blocks; ++j) {
    const std::string s = n_cov_blocks == 1 ? "" : "_" + std::to_string(j + 1);
    c.theta_names.push_back("sigma" + s);
    c.theta_names.push_back("phi" + s);
  }
  return c;
}

/// iter,logpost,beta...,sigma,phi with one row per retained draw.
inline std::string chain_to_csv(const PosteriorSamples& s, const ChainColumns& cols) {
  std::ostringstream os;
  os << "iter,logpost";
  for (const auto& n : cols.beta_names) os << ',' << n;
  for (const auto& n : cols.theta_names) os << ',' << n;
  os << "\n";
  for (const Draw& d : s.draws) {
    os << d.iteration << ',' << lgcp::detail::fmt17(d.log_post);
    for (Eigen::Index j = 0; j < d.beta.size(); ++j) os << ',' << lgcp::detail::fmt17(d.beta[j]);
    for (Eigen::Index j = 0; j < d.sigma.size(); ++j)
      os << ',' << lgcp::detail::fmt17(d.sigma[j]) << ',' << lgcp::detail::fmt17(d.phi[j]);
    os << "\n";
  }
  return os.str();
}

/// Retained fields: one row per (draw, field index) with the values on the
/// observation cells in row-major order.
inline std::string fields_to_csv(const PosteriorSamples& s) {
  std::ostringstream os;
  os << "iter,field,values...\n";
  for (const Draw& d : s.draws)
    for (std::size_t f = 0; f < d.fields.size(); ++f) {
      os << d.iteration << ',' << f;
      for (Eigen::Index k = 0; k < d.fields[f].size(); ++k)
        os << ',' << lgcp::detail::fmt17(d.fields[f][k]);
      os << "\n";
    }
  return os.str();
}

/// Rebuild draws from a chain CSV and its fields CSV.
inline PosteriorSamples parse_chain(const std::string& chain_text, const std::string& fields_text,
                                    const std::string& source = "chain") {
  PosteriorSamples out;
  std::istringstream is(chain_text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  std::size_t nb = 0, nt = 0;
  std::map<long, std::size_t> by_iter;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    const std::string ctx = source + ": line " + std::to_string(lineno);
    if (header.empty()) {
      if (cells.size() < 2 || cells[0] != "iter" || cells[1] != "logpost")
        throw InvalidInput(ctx + ": header must start with iter,logpost");
      header = cells;
      for (std::size_t c = 2; c < cells.size(); ++c) {
        if (cells[c].rfind("beta", 0) == 0) ++nb;
        else ++nt;
      }
      if (nt % 2 != 0) throw InvalidInput(ctx + ": sigma/phi columns must come in pairs");
      continue;
    }
    if (cells.size() != header.size()) throw InvalidInput(ctx + ": wrong number of fields");
    Draw d;
    d.iteration = static_cast<long>(detail::parse_integer(cells[0], ctx));
    d.log_post = detail::parse_real(cells[1], ctx);
    d.beta.resize(static_cast<Eigen::Index>(nb));
    for (std::size_t j = 0; j < nb; ++j) d.beta[static_cast<Eigen::Index>(j)] = detail::parse_real(cells[2 + j], ctx);
    d.sigma.resize(static_cast<Eigen::Index>(nt / 2));
    d.phi.resize(static_cast<Eigen::Index>(nt / 2));
    for (std::size_t j = 0; j < nt / 2; ++j) {
      d.sigma[static_cast<Eigen::Index>(j)] = detail::parse_real(cells[2 + nb + 2 * j], ctx);
      d.phi[static_cast<Eigen::Index>(j)] = detail::parse_real(cells[3 + nb + 2 * j], ctx);
    }
    by_iter[d.iteration] = out.draws.size();
    out.draws.push_back(std::move(d));
  }
  if (header.empty()) throw InvalidInput(source + ": empty chain file");

  std::istringstream fs(fields_text);
  lineno = 0;
  bool fheader = false;
  while (std::getline(fs, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    if (!fheader) {
      fheader = true;
      continue;
    }
    const auto cells = detail::split(line, ',');
    const std::string ctx = source + " fields: line " + std::to_string(lineno);
    if (cells.size() < 3) throw InvalidInput(ctx + ": too few fields");
    const long it = static_cast<long>(detail::parse_integer(cells[0], ctx));
    const auto f = static_cast<std::size_t>(detail::parse_integer(cells[1], ctx));
    auto found = by_iter.find(it);
    if (found == by_iter.end()) throw InvalidInput(ctx + ": iteration " + std::to_string(it) + " not in chain");
    Draw& d = out.draws[found->second];
    if (f != d.fields.size()) throw InvalidInput(ctx + ": field rows out of order");
    Vector v(static_cast<Eigen::Index>(cells.size() - 2));
    for (std::size_t k = 2; k < cells.size(); ++k) v[static_cast<Eigen::Index>(k - 2)] = detail::parse_real(cells[k], ctx);
    if (out.n_obs == 0) out.n_obs = static_cast<std::size_t>(v.size());
    if (static_cast<std::size_t>(v.size()) != out.n_obs) throw InvalidInput(ctx + ": inconsistent field length");
    d.fields.push_back(std::move(v));
  }
  for (const Draw& d : out.draws)
    if (d.fields.size() != out.draws.front().fields.size())
      throw InvalidInput(source + ": draws have differing numbers of fields");
  return out;
}

}  // namespace lgcp::io

#endif  // LGCP_IO_CSV_HPP
