#pragma once

// Versioned plain-text mesh format (see docs/file_formats.md) plus a JSON export.
//
//   HYGRO_MESH
//   schema_version 1
//   BOX x0 y0 x1 y1
//   NODES n            -> "id x y phase"
//   TRIANGLES n        -> "id a b c phase"
//   INTERFACES n       -> "id a1 b1 a2 b2 interface_id nx ny"
//   BOUNDARY n         -> "id a b marker nx ny"
//   PERIODIC n         -> "id master slave axis"
//   END
//
// Doubles are written with 17 significant digits so write -> read is bit-exact.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hygro/mesh.hpp"

namespace hygro {

inline constexpr int kMeshSchemaVersion = 1;

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

void save_mesh(const std::string& path, const Mesh& mesh);
Mesh load_mesh(const std::string& path);

/// JSON rendering of the same content, for tooling.
std::string mesh_to_json(const Mesh& mesh);

/// FNV-1a hash of the text serialization, rendered as 16 hex digits.
std::string mesh_hash(const Mesh& mesh);

}  // namespace hygro
