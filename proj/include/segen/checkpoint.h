#ifndef SEGEN_CHECKPOINT_H
#define SEGEN_CHECKPOINT_H

#include <string>

#include "segen/corpus.h"
#include "segen/params.h"

namespace segen {

// Checkpoint layout, version SEGEN1. A plain-text header followed by a
// raw binary payload:
//
//   SEGEN1
//   [config]
//   <every run-configuration field, flat `key = value`>
//   [vocab]
//   <token count>
//   <one token per line, id order>
//   [params]
//   <parameter count>
//   <name rows cols> per parameter, store order
//   [payload]
//   <4 bytes per value: IEEE-754 binary32, little-endian, header order>
//
// Parameters live at 32-bit float precision between optimizer steps, so a
// reloaded model reproduces forward passes bit-exactly with dropout off.
void save_checkpoint(const std::string& path, const ModelParams& mp,
                     const Vocabulary& vocab);

struct Checkpoint {
  ModelParams mp;
  Vocabulary vocab;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace segen

#endif
