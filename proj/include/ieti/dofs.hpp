#pragma once

#include <vector>

#include "ieti/geometry.hpp"
#include "ieti/sparse.hpp"

namespace ieti::dp {

/// Per-patch dof sets. Patch-local vectors use the "active" numbering (full
/// flat dofs minus Dirichlet dofs, ascending). Trace vectors (elements of
/// W^(k)) use the boundary numbering.
struct PatchPartition {
    std::vector<int> active;             // active -> full flat
    std::vector<int> full_to_active;     // full flat -> active or -1
    std::vector<int> interior;           // I^(k), active indices
    std::vector<int> boundary;           // B^(k), active indices
    std::vector<int> active_to_boundary; // active -> position in boundary or -1
    std::vector<int> boundary_node;      // boundary position -> interface node
    std::vector<geometry::Side> dirichlet_sides;

    int num_active() const { return static_cast<int>(active.size()); }
    int num_boundary() const { return static_cast<int>(boundary.size()); }
};

struct NodeCopy {
    int patch;
    int pos; // boundary position in that patch
    bool operator==(const NodeCopy&) const = default;
};

/// Interior/interface splitting and the identification of trace dofs across
/// patches. An interface node is one geometric dof of the continuous space
/// lying on the interface; it has one copy per patch trace containing it.
struct DofPartition {
    std::vector<PatchPartition> patches;
    std::vector<std::vector<NodeCopy>> node_copies; // sorted by patch

    int num_patches() const { return static_cast<int>(patches.size()); }
    int num_nodes() const { return static_cast<int>(node_copies.size()); }
    /// dim W = sum of trace sizes
    int trace_size() const;
};

DofPartition build_partition(const geometry::MultiPatch& mp);

/// Per-patch trace vectors, i.e. an element of W (or of its dual).
using TraceVector = std::vector<la::Vector>;
TraceVector zero_trace(const DofPartition& part);

struct JumpRow {
    NodeCopy plus;
    NodeCopy minus;
    double scaled = 1.0; // B_D entry magnitude (1 / multiplicity)
};

/// Signed incidence matrix B (entries +-1) and its multiplicity-scaled version
/// B_D (entries +-1/m). For a node with m copies the rows chain the copies
/// (m - 1 rows), so the row set is non-redundant.
struct JumpOperator {
    std::vector<JumpRow> rows;

    int size() const { return static_cast<int>(rows.size()); }
    /// B w
    la::Vector apply(const TraceVector& w) const;
    /// w += B^T lambda
    void apply_transpose_add(const la::Vector& lambda, TraceVector& w) const;
    la::Vector apply_scaled(const TraceVector& w) const;
    void apply_scaled_transpose_add(const la::Vector& lambda, TraceVector& w) const;
};

/// `excluded_nodes[n]` true skips node n (e.g. nodes fixed by primal
/// constraints). An empty vector excludes nothing.
JumpOperator build_jump_operators(const DofPartition& part,
                                  const std::vector<bool>& excluded_nodes = {});

enum class PrimalKind { Vertex, Edge };

struct PrimalRow {
    PrimalKind kind;
    int global_id;
    std::vector<std::pair<int, double>> entries; // (boundary position, weight)
    int designated = -1; // Edge rows: boundary position replaced by the average
};

struct PatchConstraints {
    std::vector<PrimalRow> rows;
    la::SparseMatrix c; // n_pi x |B|

    int size() const { return static_cast<int>(rows.size()); }
    std::vector<int> global_ids() const;
};

/// Vertex-value and edge-average continuity functionals.
struct PrimalConstraints {
    std::vector<PatchConstraints> patches;
    std::vector<PrimalKind> kinds; // by global primal id
    /// Nodes whose continuity is implied by the primal constraints together
    /// with the remaining multipliers: vertex nodes and one designated node
    /// per constrained edge.
    std::vector<bool> primal_nodes;

    int num_primal() const { return static_cast<int>(kinds.size()); }
};

/// One vertex row per patch corner at an interface vertex that is not on the
/// Dirichlet boundary, one edge-average row per interface side with at least
/// one non-vertex active dof. Edge weights are the integrals of the trace
/// basis functions, normalized over the active edge dofs so that C 1 = 1.
PrimalConstraints build_constraints(const geometry::MultiPatch& mp, const DofPartition& part);

} // namespace ieti::dp
