#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace b2t {

// Character vocabulary for CTC transcription. Index 0 is the blank token and
// never appears in transcripts; the default alphabet is the 26 lowercase
// letters, space, and apostrophe (29 tokens total).
class Vocabulary {
public:
    static constexpr std::size_t kBlankId = 0;

    static std::string default_alphabet() { return "abcdefghijklmnopqrstuvwxyz '"; }

    Vocabulary() : Vocabulary(default_alphabet()) {}

    explicit Vocabulary(const std::string& alphabet) : alphabet_(alphabet) {
        to_id_.fill(-1);
        for (std::size_t i = 0; i < alphabet_.size(); ++i) {
            const auto uc = static_cast<unsigned char>(alphabet_[i]);
            if (to_id_[uc] != -1)
                throw std::invalid_argument(std::string("vocabulary: duplicate token '") + alphabet_[i] + "'");
            to_id_[uc] = static_cast<int>(i + 1);  // 0 is blank
        }
    }

    std::size_t size() const { return alphabet_.size() + 1; }
    const std::string& alphabet() const { return alphabet_; }

    // token id -> character; blank has no character
    char token(std::size_t id) const {
        if (id == kBlankId || id > alphabet_.size())
            throw std::invalid_argument("vocabulary: no character for token id " + std::to_string(id));
        return alphabet_[id - 1];
    }

    int id(char c) const {
        const int v = to_id_[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument(std::string("vocabulary: character '") + c + "' not in alphabet");
        return v;
    }

    bool contains(char c) const { return to_id_[static_cast<unsigned char>(c)] >= 0; }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> out;
        out.reserve(text.size());
        for (char c : text) out.push_back(id(c));
        return out;
    }

    std::string decode(const std::vector<int>& tokens) const {
        std::string out;
        out.reserve(tokens.size());
        for (int t : tokens) out.push_back(token(static_cast<std::size_t>(t)));
        return out;
    }

private:
    std::string alphabet_;
    std::array<int, 256> to_id_{};
};

}  // namespace b2t
