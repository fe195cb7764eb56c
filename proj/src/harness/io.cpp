#include "dacph/harness/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dacph/ph/errors.hpp"

#ifndef DACPH_VERSION
#define DACPH_VERSION "0.0.0"
#endif

namespace dacph::harness {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Figures from the CSV outputs in this directory.

usage: python3 plot_runs.py [directory]
"""
import csv
import glob
import os
import statistics
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def plot_episodes(directory):
    paths = sorted(glob.glob(os.path.join(directory, "run_*.csv")))
    if not paths:
        return
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    for path in paths:
        d = read_table(path)
        if not d:
            continue
        axes[0][0].plot(d["t"], d["x1"], lw=0.8)
        axes[0][1].plot(d["t"], d["x2"], lw=0.8)
        axes[1][0].plot(d["t"], [p - c for p, c in zip(d["Pi2"], d["Pic2"])], lw=0.8)
        axes[1][1].plot(d["t"], d["tau"], lw=0.8)
    for ax, label in zip(axes.flat, ["x1 [rad]", "x2", "Pi2 - Pic2", "tau [N m]"]):
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(os.path.join(directory, "trajectories.png"), dpi=150)


def plot_returns(directory, window=20):
    path = os.path.join(directory, "returns.csv")
    if not os.path.exists(path):
        return
    d = read_table(path)
    ret, ma = d["return"], d["moving_average"]
    lo, hi = [], []
    for i in range(len(ret)):
        win = ret[max(0, i - window + 1) : i + 1]
        sd = statistics.stdev(win) if len(win) > 1 else 0.0
        lo.append(ma[i] - sd)
        hi.append(ma[i] + sd)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(d["episode"], ret, ".", alpha=0.4, label="episode return")
    ax.plot(d["episode"], ma, label="moving average")
    ax.fill_between(d["episode"], lo, hi, alpha=0.2)
    ax.set_xlabel("episode")
    ax.set_ylabel("return")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(directory, "returns.png"), dpi=150)


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    plot_episodes(target)
    plot_returns(target)
)PY";

}  // namespace

const char* tool_version() { return DACPH_VERSION; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

std::string episode_csv(const pendulum::EpisodeLog& log) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : log.rows) {
    const double vals[] = {r.t,       r.x(0),    r.x(1),  r.z(0), r.z(1),  r.pi_c(0),
                           r.pi_c(1), r.pi(0),   r.pi(1), r.tau,  r.H,     r.reward};
    bool first = true;
    for (double v : vals) {
      if (!first) out += ',';
      out += format_double(v);
      first = false;
    }
    out += '\n';
  }
  return out;
}

std::string table_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("table_csv: header/column mismatch");
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw std::invalid_argument("table_csv: ragged columns");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      out += format_double(columns[i][r]);
    }
    out += '\n';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command,
                             const std::vector<std::string>& outputs) {
  return {{"format_version", kManifestFormat},
          {"tool", "dacph"},
          {"tool_version", tool_version()},
          {"command", command},
          {"seed", cfg.seed},
          {"config_hash", config_hash(cfg)},
          {"defaults_applied", cfg.defaults_applied},
          {"config", to_json(cfg)},
          {"outputs", outputs}};
}

void write_manifest(const fs::path& path, const nlohmann::json& manifest) {
  write_text(path, manifest.dump(2) + "\n");
}

RunConfig load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open manifest");
  const auto doc = nlohmann::json::parse(in);
  const int version = doc.at("format_version").get<int>();
  if (version != kManifestFormat) {
    throw ConfigError("format_version", "unsupported manifest version " + std::to_string(version));
  }
  RunConfig cfg = parse_config(doc.at("config"));
  const auto recorded = doc.at("config_hash").get<std::string>();
  if (config_hash(cfg) != recorded) {
    throw ConfigError("config_hash", "manifest hash does not match its configuration");
  }
  return cfg;
}

void write_plot_script(const fs::path& dir) { write_text(dir / "plot_runs.py", kPlotScript); }

}  // namespace dacph::harness
