#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foul/errors.hpp"
#include "foul/geometry.hpp"

namespace foul {

struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Flat, ordered array of parameters (or pseudo-gradients) addressed through
/// named, non-overlapping segments. The exchange currency between clients
/// and server.
class ParamVector {
 public:
  ParamVector() = default;

  /// Single anonymous-segment vector.
  static ParamVector flat(std::string name, std::vector<double> values) {
    ParamVector p;
    p.append_segment(std::move(name), std::move(values));
    return p;
  }

  void append_segment(std::string name, std::vector<double> segment_values) {
    if (has_segment(name)) {
      throw LookupError("ParamVector: duplicate segment '" + name + "'");
    }
    ParamSegment seg;
    seg.name = std::move(name);
    seg.offset = values_.size();
    seg.length = segment_values.size();
    values_.insert(values_.end(), segment_values.begin(),
                   segment_values.end());
    layout_.push_back(std::move(seg));
  }

  bool has_segment(std::string_view name) const {
    for (const auto& s : layout_) {
      if (s.name == name) return true;
    }
    return false;
  }

  std::span<double> segment(std::string_view name) {
    const ParamSegment& s = find(name);
    return {values_.data() + s.offset, s.length};
  }

  std::span<const double> segment(std::string_view name) const {
    const ParamSegment& s = find(name);
    return {values_.data() + s.offset, s.length};
  }

  std::size_t segment_length(std::string_view name) const {
    return find(name).length;
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }

  const std::vector<ParamSegment>& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  bool finite() const { return all_finite(values_); }

  /// Same segment names, order and lengths.
  bool layout_matches(const ParamVector& other) const {
    if (layout_.size() != other.layout_.size()) return false;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      if (layout_[i].name != other.layout_[i].name ||
          layout_[i].length != other.layout_[i].length) {
        return false;
      }
    }
    return true;
  }

  /// Zero vector with this vector's layout.
  ParamVector zeros_like() const {
    ParamVector z;
    z.layout_ = layout_;
    z.values_.assign(values_.size(), 0.0);
    return z;
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.layout_matches(b) && a.values_ == b.values_;
  }

 private:
  const ParamSegment& find(std::string_view name) const {
    for (const auto& s : layout_) {
      if (s.name == name) return s;
    }
    throw LookupError("ParamVector: unknown segment '" + std::string(name) +
                      "'");
  }

  std::vector<double> values_;
  std::vector<ParamSegment> layout_;
};

}  // namespace foul
