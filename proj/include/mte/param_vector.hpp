#ifndef MTE_PARAM_VECTOR_HPP
#define MTE_PARAM_VECTOR_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mte/error.hpp"

namespace mte {

// One named slice of the flat parameter store. Matrices are row-major with
// rows = fan-in; biases are 1 x width.
struct ParamSegment {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;  // into ParamVector::data

    std::size_t size() const { return rows * cols; }
};

// Flat real64 parameter store with a named-segment layout. Segments cover the
// data exactly, in order, without overlap.
struct ParamVector {
    std::vector<ParamSegment> segments;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }

    const ParamSegment* find(const std::string& name) const {
        for (const auto& s : segments)
            if (s.name == name) return &s;
        return nullptr;
    }

    const ParamSegment& segment(const std::string& name) const {
        const ParamSegment* s = find(name);
        require(s != nullptr, ErrKind::contract, "param segment not found: " + name);
        return *s;
    }

    ParamSegment& add_segment(const std::string& name, std::size_t rows, std::size_t cols) {
        require(find(name) == nullptr, ErrKind::contract, "duplicate param segment: " + name);
        ParamSegment seg{name, rows, cols, data.size()};
        segments.push_back(seg);
        data.resize(data.size() + rows * cols, 0.0);
        return segments.back();
    }

    bool same_layout(const ParamVector& o) const {
        if (segments.size() != o.segments.size() || data.size() != o.data.size()) return false;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto &a = segments[i], &b = o.segments[i];
            if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset)
                return false;
        }
        return true;
    }
};

}  // namespace mte

#endif
