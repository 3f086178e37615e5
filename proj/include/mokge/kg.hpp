#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mokge {

using ConceptId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    ConceptId head;
    RelationId relation;
    ConceptId tail;

    auto operator<=>(const Triple&) const = default;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

/// Lowercase and split on whitespace; ASCII punctuation is trimmed from both
/// ends of every token and empty tokens are dropped.
std::vector<std::string> normalize_tokens(std::string_view text);

/// Forms a token may take before suffix stripping: the token itself plus the
/// token with one of "ing", "ed", "es", "s" removed, when at least three
/// characters remain.
std::vector<std::string> stem_variants(std::string_view token);

/// Triple store with stable first-seen ids. Immutable once built.
class KnowledgeGraph {
  public:
    static KnowledgeGraph load(const std::filesystem::path& path);
    static KnowledgeGraph parse(std::istream& in);

    ConceptId add_concept(std::string_view surface);
    RelationId add_relation(std::string_view name);
    /// False when the triple is already present.
    bool add_triple(ConceptId head, RelationId relation, ConceptId tail);
    bool add_triple(std::string_view head, std::string_view relation, std::string_view tail);

    std::size_t num_concepts() const { return concepts_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    const std::vector<Triple>& triples() const { return triples_; }
    /// Indices into triples() of every triple touching `c` (as head or tail).
    std::span<const std::size_t> incident(ConceptId c) const;

    const std::string& concept_name(ConceptId c) const;
    const std::string& relation_name(RelationId r) const;
    std::optional<ConceptId> find_concept(std::string_view surface) const;
    std::optional<RelationId> find_relation(std::string_view name) const;
    /// Lowercased surface tokens ("living_room" -> {"living", "room"}).
    const std::vector<std::string>& concept_tokens(ConceptId c) const;

    /// Grounds `text` to concepts, matching multiword surfaces as contiguous
    /// token spans, longest first. Result is sorted and unique.
    std::vector<ConceptId> ground(std::string_view text) const;

    void write_tsv(std::ostream& out) const;
    /// FNV-1a over the TSV serialization.
    std::uint64_t fingerprint() const;

  private:
    std::vector<std::string> concepts_;
    std::vector<std::vector<std::string>> concept_tokens_;
    std::unordered_map<std::string, ConceptId> concept_index_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, RelationId> relation_index_;
    std::vector<Triple> triples_;
    std::set<Triple> triple_set_;
    std::vector<std::vector<std::size_t>> adjacency_;
    // first surface token -> concepts starting with it, longest first
    std::unordered_map<std::string, std::vector<ConceptId>> by_first_token_;
};

/// Convenience wrapper around KnowledgeGraph::ground.
std::vector<ConceptId> ground_concepts(std::string_view text, const KnowledgeGraph& kg);

struct SubgraphOptions {
    std::size_t hops = 2;
    std::size_t max_nodes = 300;  // 0 disables the cap
};

/// Sequence-associated neighborhood of a seed concept set.
struct Subgraph {
    std::vector<ConceptId> nodes;  // seeds first, then BFS discovery order
    std::vector<Triple> edges;     // kg order, original direction
    std::vector<ConceptId> seeds;  // sorted

    std::size_t size() const { return nodes.size(); }
    /// Position of `c` in nodes, if present.
    std::optional<std::size_t> local_index(ConceptId c) const;
};

/// Undirected BFS expansion of `seeds` for `hops` rounds; edges are every kg
/// triple with both endpoints inside the node set. With a cap, nodes beyond
/// max_nodes are dropped in discovery order but seeds are always kept.
Subgraph extract_subgraph(std::span<const ConceptId> seeds, const KnowledgeGraph& kg,
                          const SubgraphOptions& options = {});

/// {"nodes":[surface], "edges":[[h,r,t]], "seeds":[surface]}
nlohmann::json subgraph_to_json(const Subgraph& sg, const KnowledgeGraph& kg);

}  // namespace mokge
