#ifndef CFB_DATASET_HPP
#define CFB_DATASET_HPP

#include <map>
#include <string>
#include <vector>

#include "cfb/model.hpp"

namespace cfb {

constexpr int kMissing = -1;

/// Weighted records of variable assignments. A cell holding kMissing is
/// unobserved (selection-masked endogenous values).
struct Dataset {
    struct Row {
        std::vector<int> states; // aligned with columns; kMissing allowed
        double count = 1.0;
    };
    std::vector<VarId> columns;
    std::vector<Row> rows;

    double total_count() const;
    int column_of(VarId v) const; // -1 if absent
    bool row_complete(const Row& r) const;

    /// Merges duplicate rows by summing counts; row order is the order
    /// of first appearance.
    Dataset aggregated() const;

    /// Keeps only the given columns (all rows must observe them).
    Dataset project(const std::vector<VarId>& cols) const;

    std::map<VarId, int> row_assignment(const Row& r) const; // skips missing cells
};

/// A dataset split by a deterministic selector: the surviving complete
/// records plus the count of masked ones.
struct BiasedDataset {
    Dataset selected;
    double n_unselected = 0.0;
};

} // namespace cfb

#endif
