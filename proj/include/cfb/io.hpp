#ifndef CFB_IO_HPP
#define CFB_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cfb/dataset.hpp"
#include "cfb/fusion.hpp"
#include "cfb/model.hpp"
#include "cfb/query.hpp"

namespace cfb {

/// A model plus its presentation layer: named states per variable.
/// Dense 0-based indices everywhere else; names exist only here.
struct ModelDoc {
    Pscm model;
    std::vector<std::vector<std::string>> state_names; // per variable, per state

    int state_of(VarId v, const std::string& name) const; // -1 if unknown
};

ModelDoc parse_model(const std::string& json_text);
ModelDoc load_model(const std::string& path);
std::string model_to_json(const ModelDoc& doc); // lossless round-trip
void save_model(const ModelDoc& doc, const std::string& path);

/// CSV with a header of variable names plus an optional `count` column;
/// cells hold state names (or bare indices); empty, `?` or `*` cells are
/// masked values.
Dataset parse_dataset_csv(const std::string& csv_text, const ModelDoc& doc);
Dataset load_dataset(const std::string& path, const ModelDoc& doc);
std::string dataset_to_csv(const Dataset& data, const ModelDoc& doc);

/// Study manifest: a JSON list of {dataset, intervened, selector,
/// n_unselected, local_chances}. Selectors are given either as a scope +
/// truth table or as an expression of equality/conjunction/disjunction
/// over named states.
std::vector<StudySpec> parse_studies(const std::string& json_text, const ModelDoc& doc,
                                     const std::string& base_dir);
std::vector<StudySpec> load_studies(const std::string& path, const ModelDoc& doc);

QuerySpec parse_query(const std::string& json_text, const ModelDoc& doc);
QuerySpec load_query(const std::string& path, const ModelDoc& doc);

/// FNV-1a 64-bit digest used to stamp outputs with their input files.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t x);

std::string query_result_to_json(const QueryResult& res, const std::string& manifest_hash,
                                 std::uint64_t seed);
std::string query_result_to_csv(const QueryResult& res, const std::string& manifest_hash,
                                std::uint64_t seed);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace cfb

#endif
