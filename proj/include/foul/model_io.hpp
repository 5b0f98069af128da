#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "foul/errors.hpp"
#include "foul/model.hpp"

namespace foul {

/// Versioned flat checkpoint: a header with the architecture dims and
/// classifier mode, then segment-ordered parameter values rendered at full
/// precision. Byte-stable for equal parameters.
inline void write_model(const DisentangledModel& model, std::ostream& out) {
  const ModelDims& d = model.dims();
  out << "foul-model v1\n";
  out << "input " << d.input_dim << " hidden " << d.hidden_dim << " causal "
      << d.causal_latent << " noncausal " << d.noncausal_latent << " classes "
      << d.num_classes << " mode " << to_string(d.mode) << "\n";
  const ParamVector p = model.to_params();
  out << "params " << p.size() << "\n";
  char buf[40];
  for (const double v : p.values()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

inline void save_model(const DisentangledModel& model,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_model: cannot open " + path);
  write_model(model, out);
  if (!out) throw IoError("save_model: write failed for " + path);
}

inline DisentangledModel read_model(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "foul-model" || version != "v1") {
    throw IoError("read_model: bad header");
  }
  ModelDims dims;
  std::string key, mode;
  std::size_t declared = 0;
  while (in >> key) {
    if (key == "input") {
      in >> dims.input_dim;
    } else if (key == "hidden") {
      in >> dims.hidden_dim;
    } else if (key == "causal") {
      in >> dims.causal_latent;
    } else if (key == "noncausal") {
      in >> dims.noncausal_latent;
    } else if (key == "classes") {
      in >> dims.num_classes;
    } else if (key == "mode") {
      in >> mode;
    } else if (key == "params") {
      in >> declared;
      break;
    } else {
      throw IoError("read_model: unknown header field '" + key + "'");
    }
  }
  if (!in) throw IoError("read_model: truncated header");
  if (mode == "causal_only") {
    dims.mode = ClassifierInputMode::causal_only;
  } else if (mode == "concat") {
    dims.mode = ClassifierInputMode::concat;
  } else {
    throw IoError("read_model: unknown classifier mode '" + mode + "'");
  }
  DisentangledModel model(dims);
  ParamVector p = model.to_params();
  if (declared != p.size()) {
    throw IoError("read_model: parameter count mismatch");
  }
  for (double& v : p.values()) {
    if (!(in >> v)) throw IoError("read_model: truncated parameters");
  }
  model.from_params(p);
  return model;
}

inline DisentangledModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_model: cannot open " + path);
  return read_model(in);
}

}  // namespace foul
