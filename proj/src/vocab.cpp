#include "mokge/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mokge {

namespace {

const std::string kSpecials[] = {"<pad>", "<bos>", "<eos>", "<unk>"};

std::string expert_token_name(std::size_t z) { return "<expert_" + std::to_string(z) + ">"; }

}  // namespace

std::vector<std::string> tokenize_text(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream is{std::string(text)};
    for (std::string tok; is >> tok;) {
        for (char& c : tok)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(std::move(tok));
    }
    return out;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    Vocab v;
    v.tokens_ = std::move(tokens);
    for (TokenId i = 0; i < v.tokens_.size(); ++i)
        if (!v.index_.emplace(v.tokens_[i], i).second)
            throw std::runtime_error("duplicate vocabulary token: " + v.tokens_[i]);
    while (v.kFirstExpert + v.num_experts_ < v.tokens_.size() &&
           v.tokens_[kFirstExpert + v.num_experts_] == expert_token_name(v.num_experts_))
        ++v.num_experts_;
    return v;
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t num_experts) {
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts)
        for (auto& tok : tokenize_text(text))
            ++counts[tok];
    std::vector<std::string> tokens(std::begin(kSpecials), std::end(kSpecials));
    for (std::size_t z = 0; z < num_experts; ++z)
        tokens.push_back(expert_token_name(z));
    std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    const std::size_t reserved = tokens.size();
    for (auto& [tok, n] : sorted)
        if (std::find(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(reserved), tok) ==
            tokens.begin() + static_cast<std::ptrdiff_t>(reserved))
            tokens.push_back(tok);
    return from_tokens(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        tokens.push_back(line);
    }
    if (tokens.size() < 4 || !std::equal(std::begin(kSpecials), std::end(kSpecials), tokens.begin()))
        throw std::runtime_error("vocabulary file lacks the special tokens: " + path.string());
    return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write vocabulary: " + path.string());
    for (const auto& t : tokens_)
        out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

TokenId Vocab::expert_token(std::size_t expert) const {
    if (expert >= num_experts_)
        throw std::out_of_range("expert id " + std::to_string(expert) + " >= " +
                                std::to_string(num_experts_));
    return kFirstExpert + expert;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& tok : tokenize_text(text))
        ids.push_back(id(tok));
    return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id == kEos)
            break;
        if (id < kFirstExpert + num_experts_)
            continue;
        if (!out.empty())
            out += ' ';
        out += tokens_.at(id);
    }
    return out;
}

std::uint64_t Vocab::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& t : tokens_) {
        for (unsigned char c : t) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= '\n';
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace mokge
