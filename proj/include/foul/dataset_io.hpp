#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "foul/datagen.hpp"
#include "foul/errors.hpp"

namespace foul {

/// Versioned plain-text tabular dataset format:
///   foul-dataset v1
///   dims <causal+spurious total feature dim>
///   classes <C>
///   domain <id>
///   <label> <f0> <f1> ...   (one row per sample)
/// All samples must share the header's domain id.
inline void write_dataset(const LabeledDataset& data, std::ostream& out,
                          int domain_id) {
  data.validate();
  for (const int d : data.domain_ids) {
    if (d != domain_id) {
      throw DataError("write_dataset: mixed-domain dataset");
    }
  }
  out << "foul-dataset v1\n";
  out << "dims " << data.feature_dim << "\n";
  out << "classes " << data.num_classes << "\n";
  out << "domain " << domain_id << "\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (const double v : data.inputs[i]) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

inline void save_dataset(const LabeledDataset& data, const std::string& path,
                         int domain_id) {
  std::ofstream out(path);
  if (!out) throw IoError("save_dataset: cannot open " + path);
  write_dataset(data, out, domain_id);
  if (!out) throw IoError("save_dataset: write failed for " + path);
}

inline LabeledDataset read_dataset(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "foul-dataset" ||
      version != "v1") {
    throw IoError("read_dataset: bad header");
  }
  std::string key;
  std::size_t dims = 0;
  int classes = 0;
  int domain = 0;
  for (int i = 0; i < 3; ++i) {
    if (!(in >> key)) throw IoError("read_dataset: truncated header");
    if (key == "dims") {
      in >> dims;
    } else if (key == "classes") {
      in >> classes;
    } else if (key == "domain") {
      in >> domain;
    } else {
      throw IoError("read_dataset: unknown header field '" + key + "'");
    }
  }
  if (!in || dims == 0 || classes < 2) {
    throw IoError("read_dataset: invalid header values");
  }
  LabeledDataset data;
  data.feature_dim = dims;
  data.num_classes = classes;
  int label = 0;
  while (in >> label) {
    std::vector<double> x(dims);
    for (double& v : x) {
      if (!(in >> v)) throw IoError("read_dataset: truncated row");
    }
    data.append(std::move(x), label, domain);
  }
  return data;
}

inline LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  return read_dataset(in);
}

}  // namespace foul
