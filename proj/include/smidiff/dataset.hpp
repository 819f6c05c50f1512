//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SMIDIFF_DATASET_HPP_
#define SMIDIFF_DATASET_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smidiff/smiles_tok.hpp"

namespace smidiff {

struct DatasetRecord {
  std::string cid;
  std::string smiles;
  std::string description;

  bool operator==(const DatasetRecord &) const = default;
};

// Header names of the three columns; the file may carry extra columns.
struct ColumnFormat {
  std::string cid = "CID";
  std::string smiles = "SMILES";
  std::string description = "description";

  // "cid=ID,smiles=canonical,description=text"; unspecified keys keep their
  // defaults. Throws InvalidArgument.
  static ColumnFormat parse(const std::string &spec);
};

struct IngestResult {
  std::vector<DatasetRecord> records;
  Vocabulary vocab;
  std::size_t total = 0;    // data lines read
  std::size_t dropped = 0;  // untokenizable or longer than n
};

// Reads a tab-separated file. When `vocab` is empty a vocabulary is built
// from the accepted records; otherwise records whose tokens are missing
// from it are dropped as well. Throws FileError / HeaderError.
IngestResult ingest_dataset(const std::string &path,
                            const std::optional<Vocabulary> &vocab, int n,
                            const ColumnFormat &format = {});
IngestResult ingest_dataset(std::istream &is,
                            const std::optional<Vocabulary> &vocab, int n,
                            const ColumnFormat &format = {});

void write_dataset(std::ostream &os, const std::vector<DatasetRecord> &records);
void write_dataset(const std::string &path,
                   const std::vector<DatasetRecord> &records);

// Deterministic synthetic molecules (chains with an optional ring, one
// functional group and an optional methyl branch; 3-12 heavy atoms) with
// templated descriptions. Every record fits in `max_len` tokens including
// [SOS]/[EOS]. Throws InvalidArgument when `count` exceeds the number of
// distinct structures available.
std::vector<DatasetRecord> synth_dataset(std::size_t count, std::uint64_t seed,
                                         int max_len = 32);

// Size of the structure space synth_dataset draws from.
std::size_t synth_space_size(int max_len = 32);

}  // namespace smidiff

#endif  // SMIDIFF_DATASET_HPP_
