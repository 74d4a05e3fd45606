#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "causalegm/errors.hpp"
#include "causalegm/mat.hpp"

// Raw little-endian binary IO for the model file format. The build targets
// little-endian hosts; the assert makes that assumption explicit instead of
// silently writing byte-swapped files elsewhere.

namespace cegm::io {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; byte swapping is not implemented");

template <class T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("model file truncated");
    return v;
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_pod(os, v); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_pod(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }

inline std::uint8_t read_u8(std::istream& is) { return read_pod<std::uint8_t>(is); }
inline std::uint32_t read_u32(std::istream& is) { return read_pod<std::uint32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_pod<std::uint64_t>(is); }
inline double read_f64(std::istream& is) { return read_pod<double>(is); }

inline void write_mat(std::ostream& os, const Mat& m) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

// fills a pre-shaped matrix
inline void read_mat(std::istream& is, Mat& m) {
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw FormatError("model file truncated while reading parameters");
}

}  // namespace cegm::io
