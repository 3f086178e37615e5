#include "mokge/kg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace mokge {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string> surface_tokens(std::string_view surface) {
    std::string s = lowercase(surface);
    std::replace(s.begin(), s.end(), '_', ' ');
    std::vector<std::string> tokens;
    std::istringstream is(s);
    for (std::string tok; is >> tok;)
        tokens.push_back(std::move(tok));
    return tokens;
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream is{std::string(text)};
    for (std::string raw; is >> raw;) {
        std::string_view tok = raw;
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.front())))
            tok.remove_prefix(1);
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.back())))
            tok.remove_suffix(1);
        if (!tok.empty())
            tokens.push_back(lowercase(tok));
    }
    return tokens;
}

std::vector<std::string> stem_variants(std::string_view token) {
    static constexpr std::string_view kSuffixes[] = {"ing", "ed", "es", "s"};
    constexpr std::size_t kMinStem = 3;
    std::vector<std::string> out{std::string(token)};
    for (std::string_view suffix : kSuffixes) {
        if (token.size() >= suffix.size() + kMinStem && token.ends_with(suffix))
            out.emplace_back(token.substr(0, token.size() - suffix.size()));
    }
    return out;
}

// ----------------------------------------------------------------------------

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open knowledge graph: " + path.string());
    return parse(in);
}

KnowledgeGraph KnowledgeGraph::parse(std::istream& in) {
    KnowledgeGraph kg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (;;) {
            const auto tab = rest.find('\t');
            fields.push_back(trim(rest.substr(0, tab)));
            if (tab == std::string_view::npos)
                break;
            rest.remove_prefix(tab + 1);
        }
        if (fields.size() != 3)
            throw ParseError("expected head<TAB>relation<TAB>tail, found " +
                                 std::to_string(fields.size()) + " field(s)",
                             lineno);
        for (auto f : fields)
            if (f.empty())
                throw ParseError("empty field", lineno);
        kg.add_triple(fields[0], fields[1], fields[2]);
    }
    return kg;
}

ConceptId KnowledgeGraph::add_concept(std::string_view surface) {
    std::string key(surface);
    if (auto it = concept_index_.find(key); it != concept_index_.end())
        return it->second;
    const auto id = static_cast<ConceptId>(concepts_.size());
    concepts_.push_back(key);
    concept_tokens_.push_back(surface_tokens(surface));
    concept_index_.emplace(std::move(key), id);
    adjacency_.emplace_back();
    const auto& toks = concept_tokens_.back();
    if (!toks.empty()) {
        auto& bucket = by_first_token_[toks.front()];
        bucket.push_back(id);
        std::stable_sort(bucket.begin(), bucket.end(), [this](ConceptId a, ConceptId b) {
            return concept_tokens_[a].size() > concept_tokens_[b].size();
        });
    }
    return id;
}

RelationId KnowledgeGraph::add_relation(std::string_view name) {
    std::string key(name);
    if (auto it = relation_index_.find(key); it != relation_index_.end())
        return it->second;
    const auto id = static_cast<RelationId>(relations_.size());
    relations_.push_back(key);
    relation_index_.emplace(std::move(key), id);
    return id;
}

bool KnowledgeGraph::add_triple(ConceptId head, RelationId relation, ConceptId tail) {
    if (head >= concepts_.size() || tail >= concepts_.size() || relation >= relations_.size())
        throw std::out_of_range("add_triple: invalid concept or relation id");
    if (!triple_set_.insert({head, relation, tail}).second)
        return false;
    const std::size_t idx = triples_.size();
    triples_.push_back({head, relation, tail});
    adjacency_[head].push_back(idx);
    if (tail != head)
        adjacency_[tail].push_back(idx);
    return true;
}

bool KnowledgeGraph::add_triple(std::string_view head, std::string_view relation,
                                std::string_view tail) {
    const ConceptId h = add_concept(head);
    const RelationId r = add_relation(relation);
    const ConceptId t = add_concept(tail);
    return add_triple(h, r, t);
}

std::span<const std::size_t> KnowledgeGraph::incident(ConceptId c) const {
    return adjacency_.at(c);
}

const std::string& KnowledgeGraph::concept_name(ConceptId c) const { return concepts_.at(c); }

const std::string& KnowledgeGraph::relation_name(RelationId r) const { return relations_.at(r); }

std::optional<ConceptId> KnowledgeGraph::find_concept(std::string_view surface) const {
    if (auto it = concept_index_.find(std::string(surface)); it != concept_index_.end())
        return it->second;
    return std::nullopt;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
    if (auto it = relation_index_.find(std::string(name)); it != relation_index_.end())
        return it->second;
    return std::nullopt;
}

const std::vector<std::string>& KnowledgeGraph::concept_tokens(ConceptId c) const {
    return concept_tokens_.at(c);
}

std::vector<ConceptId> KnowledgeGraph::ground(std::string_view text) const {
    const auto tokens = normalize_tokens(text);
    std::vector<std::vector<std::string>> variants;
    variants.reserve(tokens.size());
    for (const auto& t : tokens)
        variants.push_back(stem_variants(t));

    auto matches_at = [&](std::size_t pos, const std::string& word) {
        const auto& v = variants[pos];
        return std::find(v.begin(), v.end(), word) != v.end();
    };

    std::vector<ConceptId> found;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t best_len = 0;
        std::vector<ConceptId> best;
        for (const auto& form : variants[i]) {
            auto it = by_first_token_.find(form);
            if (it == by_first_token_.end())
                continue;
            for (ConceptId c : it->second) {
                const auto& ctoks = concept_tokens_[c];
                if (ctoks.size() < best_len || i + ctoks.size() > tokens.size())
                    continue;
                bool ok = true;
                for (std::size_t k = 1; k < ctoks.size() && ok; ++k)
                    ok = matches_at(i + k, ctoks[k]);
                if (!ok)
                    continue;
                if (ctoks.size() > best_len) {
                    best_len = ctoks.size();
                    best.clear();
                }
                best.push_back(c);
            }
        }
        if (best_len == 0) {
            ++i;
            continue;
        }
        found.insert(found.end(), best.begin(), best.end());
        i += best_len;
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
}

void KnowledgeGraph::write_tsv(std::ostream& out) const {
    for (const auto& t : triples_)
        out << concepts_[t.head] << '\t' << relations_[t.relation] << '\t' << concepts_[t.tail]
            << '\n';
}

std::uint64_t KnowledgeGraph::fingerprint() const {
    std::ostringstream os;
    write_tsv(os);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<ConceptId> ground_concepts(std::string_view text, const KnowledgeGraph& kg) {
    return kg.ground(text);
}

// ----------------------------------------------------------------------------

std::optional<std::size_t> Subgraph::local_index(ConceptId c) const {
    auto it = std::find(nodes.begin(), nodes.end(), c);
    if (it == nodes.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

Subgraph extract_subgraph(std::span<const ConceptId> seeds, const KnowledgeGraph& kg,
                          const SubgraphOptions& options) {
    Subgraph sg;
    sg.seeds.assign(seeds.begin(), seeds.end());
    std::sort(sg.seeds.begin(), sg.seeds.end());
    sg.seeds.erase(std::unique(sg.seeds.begin(), sg.seeds.end()), sg.seeds.end());
    for (ConceptId c : sg.seeds)
        if (c >= kg.num_concepts())
            throw std::out_of_range("extract_subgraph: unknown concept id " + std::to_string(c));

    std::vector<char> visited(kg.num_concepts(), 0);
    sg.nodes = sg.seeds;
    for (ConceptId c : sg.seeds)
        visited[c] = 1;
    std::vector<ConceptId> frontier = sg.seeds;
    const auto& triples = kg.triples();
    for (std::size_t hop = 0; hop < options.hops && !frontier.empty(); ++hop) {
        std::vector<ConceptId> next;
        for (ConceptId u : frontier) {
            for (std::size_t ti : kg.incident(u)) {
                const Triple& t = triples[ti];
                const ConceptId v = t.head == u ? t.tail : t.head;
                if (!visited[v]) {
                    visited[v] = 1;
                    sg.nodes.push_back(v);
                    next.push_back(v);
                }
            }
        }
        frontier = std::move(next);
    }

    if (options.max_nodes > 0 && sg.nodes.size() > options.max_nodes) {
        const std::size_t keep = std::max(options.max_nodes, sg.seeds.size());
        for (std::size_t i = keep; i < sg.nodes.size(); ++i)
            visited[sg.nodes[i]] = 0;
        sg.nodes.resize(keep);
    }

    std::vector<std::size_t> edge_ids;
    for (ConceptId u : sg.nodes) {
        for (std::size_t ti : kg.incident(u)) {
            const Triple& t = triples[ti];
            if (visited[t.head] && visited[t.tail])
                edge_ids.push_back(ti);
        }
    }
    std::sort(edge_ids.begin(), edge_ids.end());
    edge_ids.erase(std::unique(edge_ids.begin(), edge_ids.end()), edge_ids.end());
    sg.edges.reserve(edge_ids.size());
    for (std::size_t ti : edge_ids)
        sg.edges.push_back(triples[ti]);
    return sg;
}

nlohmann::json subgraph_to_json(const Subgraph& sg, const KnowledgeGraph& kg) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (ConceptId c : sg.nodes)
        j["nodes"].push_back(kg.concept_name(c));
    j["edges"] = nlohmann::json::array();
    for (const Triple& t : sg.edges)
        j["edges"].push_back({kg.concept_name(t.head), kg.relation_name(t.relation),
                              kg.concept_name(t.tail)});
    j["seeds"] = nlohmann::json::array();
    for (ConceptId c : sg.seeds)
        j["seeds"].push_back(kg.concept_name(c));
    return j;
}

}  // namespace mokge
