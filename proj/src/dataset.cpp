// SPDX-License-Identifier: Apache-2.0

#include "xmodal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "xmodal/error.hpp"
#include "xmodal/volume_io.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string ManifestEntry::image_id() const {
  std::string name = mri_path.filename().string();
  for (std::string_view ext : {".nii.gz", ".nii", ".xvol"})
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
      name.resize(name.size() - ext.size());
      break;
    }
  if (name.size() > 4 && name.compare(name.size() - 4, 4, "_mri") == 0) name.resize(name.size() - 4);
  return name;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty manifest");
  const auto header = split_csv(line);
  if (header != std::vector<std::string>{"subject_id", "mri_path", "pet_path", "abeta_ratio"})
    throw DataError(path.string() + ":1: expected header subject_id,mri_path,pet_path,abeta_ratio");
  Manifest out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 4) throw DataError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw DataError(where + ": empty subject_id");
    ManifestEntry e;
    e.subject_id = f[0];
    e.mri_path = fs::path(f[1]).is_absolute() ? fs::path(f[1]) : base / f[1];
    e.pet_path = fs::path(f[2]).is_absolute() ? fs::path(f[2]) : base / f[2];
    try {
      std::size_t used = 0;
      e.abeta_ratio = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(where + ": abeta_ratio '" + f[3] + "' is not a number");
    }
    if (!(e.abeta_ratio > 0.0) || !std::isfinite(e.abeta_ratio))
      throw DataError(where + ": abeta_ratio must be positive");
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError(path.string() + ": manifest has no rows");
  return out;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    auto r = fs::absolute(p).lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? fs::absolute(p).string() : r.generic_string();
  };
  out << "subject_id,mri_path,pet_path,abeta_ratio\n";
  for (const auto& e : manifest)
    out << e.subject_id << ',' << rel(e.mri_path) << ',' << rel(e.pet_path) << ','
        << std::setprecision(17) << e.abeta_ratio << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

PairedSample load_sample(const ManifestEntry& entry) {
  PairedSample s;
  s.subject_id = entry.subject_id;
  s.mri = read_volume(entry.mri_path);
  s.pet = read_volume(entry.pet_path);
  s.abeta_ratio = entry.abeta_ratio;
  validate(s);
  return s;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  for (auto s : {Split::train, Split::val, Split::test})
    if (text == to_string(s)) return s;
  throw DataError("unknown split '" + std::string(text) + "'");
}

SplitSizes default_split_sizes(std::int64_t images) {
  if (images < 0) throw UsageError("negative image count");
  SplitSizes s;
  s.train = std::llround(static_cast<double>(images) * 910.0 / 1338.0);
  s.val = std::llround(static_cast<double>(images) * 242.0 / 1338.0);
  s.test = images - s.train - s.val;
  return s;
}

SplitAssignment split_by_subject(const Manifest& manifest, const SplitSizes& sizes, std::uint64_t seed) {
  if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0) throw UsageError("split sizes must be non-negative");
  if (sizes.total() != static_cast<std::int64_t>(manifest.size()))
    throw UsageError("split sizes sum to " + std::to_string(sizes.total()) + " but the manifest has " +
                     std::to_string(manifest.size()) + " images");
  std::map<std::string, std::int64_t> counts;
  std::vector<std::string> subjects;
  for (const auto& e : manifest)
    if (counts[e.subject_id]++ == 0) subjects.push_back(e.subject_id);
  std::sort(subjects.begin(), subjects.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = subjects.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(subjects[i - 1], subjects[pick(rng)]);
  }
  const std::array<Split, 3> order{Split::train, Split::val, Split::test};
  std::array<std::int64_t, 3> deficit{sizes.train, sizes.val, sizes.test};
  SplitAssignment out;
  for (const auto& s : subjects) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (deficit[k] > deficit[best]) best = k;
    out[s] = order[best];
    deficit[best] -= counts[s];
  }
  return out;
}

Manifest select(const Manifest& manifest, const SplitAssignment& assignment, Split split) {
  Manifest out;
  for (const auto& e : manifest) {
    auto it = assignment.find(e.subject_id);
    if (it == assignment.end()) throw DataError("subject " + e.subject_id + " has no split assignment");
    if (it->second == split) out.push_back(e);
  }
  return out;
}

SplitSizes split_totals(const Manifest& manifest, const SplitAssignment& assignment) {
  SplitSizes t;
  for (const auto& e : manifest) {
    auto it = assignment.find(e.subject_id);
    if (it == assignment.end()) throw DataError("subject " + e.subject_id + " has no split assignment");
    (it->second == Split::train ? t.train : it->second == Split::val ? t.val : t.test) += 1;
  }
  return t;
}

void check_no_leakage(const Manifest& manifest, const SplitAssignment& assignment) {
  std::array<std::set<std::string>, 3> sets;
  for (const auto& e : manifest) {
    auto it = assignment.find(e.subject_id);
    if (it == assignment.end()) throw DataError("subject " + e.subject_id + " has no split assignment");
    sets[static_cast<std::size_t>(it->second)].insert(e.subject_id);
  }
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      for (const auto& s : sets[a])
        if (sets[b].count(s)) throw DataError("subject leakage: " + s + " appears in two splits");
}

void write_splits(const SplitAssignment& assignment, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "subject_id,split\n";
  for (const auto& [subject, split] : assignment) out << subject << ',' << to_string(split) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

SplitAssignment read_splits(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read splits " + path.string());
  std::string line;
  std::getline(in, line);
  if (split_csv(line) != std::vector<std::string>{"subject_id", "split"})
    throw DataError(path.string() + ":1: expected header subject_id,split");
  SplitAssignment out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    if (!out.emplace(f[0], parse_split(f[1])).second)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate subject " + f[0]);
  }
  return out;
}

}  // namespace xmodal
