#pragma once

#include <string>

#include "epskit/materials.hpp"

#ifndef EPSKIT_DATA_DIR
#error "EPSKIT_DATA_DIR must point at the data directory"
#endif

inline const epskit::MaterialDatabase &shipped_db() {
  static const auto db = epskit::MaterialDatabase::load(std::string(EPSKIT_DATA_DIR) + "/materials.json");
  return db;
}
