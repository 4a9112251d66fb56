#pragma once

// Flat binary dump of a DistributionField.
//
//   bytes  0..7    magic "BGKCKPT1"
//   int64 x 5      spatial_dims, velocity_dims, spatial_points,
//                  velocity_points, kind (0 = absolute F, 1 = perturbation f)
//   float64 x 5    velocity_cutoff, domain_length[0..2], t
//   float64 x N    values, N = spatial_points^spatial_dims *
//                  velocity_points^velocity_dims, spatial-major
//
// Every number is little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bgk/errors.hpp"
#include "bgk/phase_grid.hpp"

namespace bgk {

inline constexpr char checkpoint_magic[9] = "BGKCKPT1";

struct Checkpoint {
    GridConfig grid;
    FieldKind kind = FieldKind::absolute;
    double t = 0.0;
    std::vector<double> values;
};

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    unsigned char bytes[8];
    std::memcpy(bytes, &value, 8);
    if constexpr (std::endian::native == std::endian::big)
        for (int k = 0; k < 4; ++k) std::swap(bytes[k], bytes[7 - k]);
    os.write(reinterpret_cast<const char*>(bytes), 8);
}

template <class T>
T read_le(std::istream& is) {
    static_assert(sizeof(T) == 8);
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw InvalidConfig("checkpoint is truncated");
    if constexpr (std::endian::native == std::endian::big)
        for (int k = 0; k < 4; ++k) std::swap(bytes[k], bytes[7 - k]);
    T value;
    std::memcpy(&value, bytes, 8);
    return value;
}

} // namespace detail

inline void write_checkpoint(const std::string& path, const DistributionField& field, double t = 0.0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidConfig("cannot open checkpoint for writing: " + path);
    const auto& c = field.grid().config();
    os.write(checkpoint_magic, 8);
    detail::write_le<std::int64_t>(os, c.spatial_dims);
    detail::write_le<std::int64_t>(os, c.velocity_dims);
    detail::write_le<std::int64_t>(os, c.spatial_points);
    detail::write_le<std::int64_t>(os, c.velocity_points);
    detail::write_le<std::int64_t>(os, field.kind() == FieldKind::absolute ? 0 : 1);
    detail::write_le<double>(os, c.velocity_cutoff);
    for (double L : c.domain_length) detail::write_le<double>(os, L);
    detail::write_le<double>(os, t);
    for (double x : field.values()) detail::write_le<double>(os, x);
    if (!os) throw InvalidConfig("failed writing checkpoint " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidConfig("cannot open checkpoint: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, checkpoint_magic, 8) != 0)
        throw InvalidConfig("not a checkpoint file: " + path);
    Checkpoint ck;
    ck.grid.spatial_dims = static_cast<int>(detail::read_le<std::int64_t>(is));
    ck.grid.velocity_dims = static_cast<int>(detail::read_le<std::int64_t>(is));
    ck.grid.spatial_points = static_cast<int>(detail::read_le<std::int64_t>(is));
    ck.grid.velocity_points = static_cast<int>(detail::read_le<std::int64_t>(is));
    const auto kind = detail::read_le<std::int64_t>(is);
    if (kind != 0 && kind != 1) throw InvalidConfig("checkpoint has an unknown field kind");
    ck.kind = kind == 0 ? FieldKind::absolute : FieldKind::perturbation;
    ck.grid.velocity_cutoff = detail::read_le<double>(is);
    for (double& L : ck.grid.domain_length) L = detail::read_le<double>(is);
    ck.t = detail::read_le<double>(is);
    if (ck.grid.spatial_dims < 1 || ck.grid.spatial_dims > 3 || ck.grid.spatial_points < 1 ||
        ck.grid.velocity_points < 1 || (ck.grid.velocity_dims != 1 && ck.grid.velocity_dims != 3))
        throw InvalidConfig("checkpoint header is corrupt");
    std::size_t count = 1;
    for (int d = 0; d < ck.grid.spatial_dims; ++d) count *= ck.grid.spatial_points;
    for (int d = 0; d < ck.grid.velocity_dims; ++d) count *= ck.grid.velocity_points;
    ck.values.resize(count);
    for (double& x : ck.values) x = detail::read_le<double>(is);
    return ck;
}

/// True when the checkpoint header describes the same discretization.
inline bool checkpoint_matches(const Checkpoint& ck, const GridConfig& grid) {
    if (ck.grid.spatial_dims != grid.spatial_dims || ck.grid.velocity_dims != grid.velocity_dims ||
        ck.grid.spatial_points != grid.spatial_points || ck.grid.velocity_points != grid.velocity_points ||
        ck.grid.velocity_cutoff != grid.velocity_cutoff)
        return false;
    for (int d = 0; d < grid.spatial_dims; ++d)
        if (ck.grid.domain_length[d] != grid.domain_length[d]) return false;
    return true;
}

} // namespace bgk
