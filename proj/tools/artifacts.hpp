#pragma once

// CSV artifacts with an embedded config echo, and the matplotlib scripts that
// plot them. Scripts only read the CSVs written next to them.

#include "mvosc/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace mvosc::tools {

namespace fs = std::filesystem;

/// Where artifacts go: <dir>/<prefix><name>.
class OutputDir {
 public:
  OutputDir(const RunConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
    dir_ = cfg.output_dir();
    std::error_code ec;
    fs::create_directories(dir_, ec);
    require(!ec && fs::is_directory(dir_), ErrorKind::io, "cannot create output directory " + dir_.string());
  }

  fs::path path(const std::string& name) const { return dir_ / (cfg_.output.prefix + name); }
  std::string file(const std::string& name) const { return cfg_.output.prefix + name; }
  bool plots() const { return cfg_.output.plots; }

  /// '#'-prefixed echo of the command and the fully resolved config.
  std::string echo() const {
    std::string out = "# mvosc " + command_ + "\n";
    std::istringstream in(serialize(cfg_));
    for (std::string line; std::getline(in, line);) out += line.empty() ? "#\n" : "# " + line + "\n";
    return out;
  }

  std::vector<std::string> written;

 private:
  const RunConfig& cfg_;
  std::string command_;
  fs::path dir_;
};

class CsvWriter {
 public:
  CsvWriter(OutputDir& out, const std::string& name, const std::vector<std::string>& columns,
            const std::vector<std::string>& notes = {})
      : path_(out.path(name)), os_(path_) {
    require(static_cast<bool>(os_), ErrorKind::io, "cannot write " + path_.string());
    os_ << out.echo();
    for (const auto& n : notes) os_ << "# " << n << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << "\n";
    width_ = columns.size();
    out.written.push_back(path_.string());
  }

  void row(const std::vector<double>& values) {
    require(values.size() == width_, ErrorKind::contract_violation, "CSV row width mismatch in " + path_.string());
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.11e", values[i]);
      os_ << (i ? "," : "") << buf;
    }
    os_ << "\n";
  }

 private:
  fs::path path_;
  std::ofstream os_;
  std::size_t width_ = 0;
};

inline std::vector<std::string> indexed(const std::string& stem, int n, int first = 1) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(stem + std::to_string(i + first));
  return v;
}

inline std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ------------------------------------------------------------- plot scripts

namespace detail {

inline const char* kLoader = R"(import os
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name)) as f:
        rows = [line for line in f if not line.startswith("#")]
    names = rows[0].strip().split(",")
    data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}

)";

inline void write_script(OutputDir& out, const std::string& name, const std::string& body) {
  if (!out.plots()) return;
  const fs::path p = out.path(name);
  std::ofstream os(p);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write " + p.string());
  os << "# plotting script generated by mvosc; reads only the CSVs next to it\n" << kLoader << body;
  out.written.push_back(p.string());
}

inline std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace detail

inline void phase_portrait_script(OutputDir& out, const std::string& script, const std::string& csv,
                                  const std::string& xcol, const std::string& ycol, const std::string& title) {
  const std::string png = fs::path(out.file(script)).replace_extension(".png").string();
  detail::write_script(out, script,
                       "d = load(" + detail::quoted(csv) + ")\n"
                       "fig, ax = plt.subplots(figsize=(5, 4))\n"
                       "ax.plot(d[" + detail::quoted(xcol) + "], d[" + detail::quoted(ycol) + "], lw=1)\n"
                       "ax.set_xlabel(" + detail::quoted(xcol) + ")\n"
                       "ax.set_ylabel(" + detail::quoted(ycol) + ")\n"
                       "ax.set_title(" + detail::quoted(title) + ")\n"
                       "fig.tight_layout()\n"
                       "fig.savefig(os.path.join(HERE, " + detail::quoted(png) + "), dpi=150)\n");
}

/// Mean components against time, one line per listed column.
inline void mean_trajectory_script(OutputDir& out, const std::string& script, const std::string& csv,
                                   const std::vector<std::string>& columns, const std::string& title) {
  const std::string png = fs::path(out.file(script)).replace_extension(".png").string();
  std::string cols = "[";
  for (std::size_t i = 0; i < columns.size(); ++i) cols += (i ? ", " : "") + detail::quoted(columns[i]);
  cols += "]";
  detail::write_script(out, script,
                       "d = load(" + detail::quoted(csv) + ")\n"
                       "fig, ax = plt.subplots(figsize=(7, 4))\n"
                       "for c in " + cols + ":\n"
                       "    ax.plot(d[\"t\"], d[c], lw=1, label=c)\n"
                       "ax.set_xlabel(\"t\")\n"
                       "ax.legend()\n"
                       "ax.set_title(" + detail::quoted(title) + ")\n"
                       "fig.tight_layout()\n"
                       "fig.savefig(os.path.join(HERE, " + detail::quoted(png) + "), dpi=150)\n");
}

inline void multiplier_script(OutputDir& out, const std::string& script, const std::string& csv,
                              const std::string& title) {
  const std::string png = fs::path(out.file(script)).replace_extension(".png").string();
  detail::write_script(out, script,
                       "d = load(" + detail::quoted(csv) + ")\n"
                       "fig, ax = plt.subplots(figsize=(5, 5))\n"
                       "s = np.linspace(0, 2 * np.pi, 400)\n"
                       "ax.plot(np.cos(s), np.sin(s), \"k-\", lw=0.8)\n"
                       "ax.scatter(d[\"re\"], d[\"im\"], s=14, c=\"C3\", zorder=3)\n"
                       "ax.set_aspect(\"equal\")\n"
                       "ax.set_xlabel(\"Re\")\n"
                       "ax.set_ylabel(\"Im\")\n"
                       "ax.set_title(" + detail::quoted(title) + ")\n"
                       "fig.tight_layout()\n"
                       "fig.savefig(os.path.join(HERE, " + detail::quoted(png) + "), dpi=150)\n");
}

/// Filled contours of the phase on the grid, with the cycle drawn on top.
inline void isochron_script(OutputDir& out, const std::string& script, const std::string& grid_csv,
                            const std::string& cycle_csv, int nx, int ny) {
  const std::string png = fs::path(out.file(script)).replace_extension(".png").string();
  detail::write_script(
      out, script,
      "g = load(" + detail::quoted(grid_csv) + ")\n"
      "c = load(" + detail::quoted(cycle_csv) + ")\n"
      "nx, ny = " + std::to_string(nx) + ", " + std::to_string(ny) + "\n"
      "X = g[\"x\"].reshape(ny, nx)\n"
      "Y = g[\"y\"].reshape(ny, nx)\n"
      "P = g[\"phase\"].reshape(ny, nx)\n"
      "T = c[\"phase\"][-1] + (c[\"phase\"][1] - c[\"phase\"][0])\n"
      "# hide the cut where the phase wraps from T back to 0\n"
      "jump = np.zeros(P.shape, dtype=bool)\n"
      "jump[:, 1:] |= np.abs(np.diff(P, axis=1)) > T / 2\n"
      "jump[:, :-1] |= np.abs(np.diff(P, axis=1)) > T / 2\n"
      "jump[1:, :] |= np.abs(np.diff(P, axis=0)) > T / 2\n"
      "jump[:-1, :] |= np.abs(np.diff(P, axis=0)) > T / 2\n"
      "P = np.ma.masked_where(jump | ~np.isfinite(P), P)\n"
      "fig, ax = plt.subplots(figsize=(6, 4.5))\n"
      "cf = ax.contourf(X, Y, P, levels=np.linspace(0, T, 25), cmap=\"twilight\")\n"
      "fig.colorbar(cf, ax=ax, label=\"phase\")\n"
      "ax.plot(c[\"z1\"], c[\"z2\"], \"k-\", lw=1.5)\n"
      "ax.set_xlabel(\"z1\")\n"
      "ax.set_ylabel(\"z2\")\n"
      "ax.set_title(\"isochrons of the reduced cycle\")\n"
      "fig.tight_layout()\n"
      "fig.savefig(os.path.join(HERE, " + detail::quoted(png) + "), dpi=150)\n");
}

}  // namespace mvosc::tools
