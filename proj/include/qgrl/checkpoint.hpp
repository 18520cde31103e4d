#pragma once

#include <string>
#include <vector>

#include "qgrl/param_store.hpp"
#include "qgrl/vocab.hpp"

namespace qgrl {

// Everything a run needs to resume: an opaque JSON config snapshot, both
// vocabularies, and every named parameter array (generator, pointer and DAS
// parameters all live in the same container, distinguished by name prefix).
struct Checkpoint {
  std::string config_json;
  Vocabulary vocab;
  FeatureVocab fvocab;
  ParamStore store;
};

// Binary container: magic "QGRL", a 32-bit format version, a length-prefixed
// UTF-8 JSON header (config snapshot + vocabularies), one record per array
// (length-prefixed name, 32-bit rank, 64-bit dims, raw little-endian 64-bit
// floats), and a trailing 64-bit FNV-1a checksum of everything before it.
// The file is written to a temporary sibling and renamed into place so a
// partial write never looks like a valid checkpoint.
//
// config_json must be a JSON value (an empty string is stored as {}).
void save_checkpoint(const std::string& path, const ParamStore& store,
                     const Vocabulary& vocab, const FeatureVocab& fvocab,
                     const std::string& config_json);

// Loads and fully validates a checkpoint. Bad magic or an unsupported
// version raise FormatError (the message carries both version numbers);
// truncation or any byte corruption raises IntegrityError; unreadable files
// raise IoError.
Checkpoint load_checkpoint(const std::string& path);

// Copies the arrays whose names start with `prefix` into a fresh store —
// used to hand the DAS parameters ("das.") their own optimizer state.
ParamStore extract_prefix(const ParamStore& store, const std::string& prefix);

// Copies every array of `from` into `into` (names must not collide).
void merge_stores(ParamStore& into, const ParamStore& from);

}  // namespace qgrl
