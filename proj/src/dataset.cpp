#include "quweit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace quweit {

TextDataset TextDataset::load(const std::string& path, double split_fraction) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), split_fraction);
}

TextDataset TextDataset::from_string(const std::string& text, double split_fraction) {
    if (text.empty()) throw std::runtime_error("corpus is empty");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw std::invalid_argument("split fraction must be in (0, 1)");
    TextDataset ds;
    std::set<char> uniq(text.begin(), text.end());
    ds.vocab_.assign(uniq.begin(), uniq.end());
    std::fill(std::begin(ds.char_to_id_), std::end(ds.char_to_id_), -1);
    for (std::size_t i = 0; i < ds.vocab_.size(); ++i)
        ds.char_to_id_[static_cast<unsigned char>(ds.vocab_[i])] = static_cast<std::int32_t>(i);
    ds.ids_.reserve(text.size());
    for (char c : text) ds.ids_.push_back(ds.char_to_id_[static_cast<unsigned char>(c)]);
    ds.train_len_ = static_cast<std::size_t>(split_fraction * double(text.size()));
    return ds;
}

std::vector<std::int32_t> TextDataset::encode(const std::string& s) const {
    std::vector<std::int32_t> out;
    out.reserve(s.size());
    for (char c : s) {
        const std::int32_t id = char_to_id_[static_cast<unsigned char>(c)];
        if (id < 0) throw std::out_of_range(std::string("symbol '") + c + "' not in vocabulary");
        out.push_back(id);
    }
    return out;
}

std::string TextDataset::decode(std::span<const std::int32_t> ids) const {
    std::string out;
    out.reserve(ids.size());
    for (auto id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
            throw std::out_of_range("id " + std::to_string(id) + " outside vocabulary");
        out.push_back(vocab_[static_cast<std::size_t>(id)]);
    }
    return out;
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> sample_batch(
    std::span<const std::int32_t> split, std::size_t batch, std::size_t context, Rng& rng) {
    if (split.size() <= context)
        throw std::invalid_argument("corpus split of " + std::to_string(split.size()) +
                                    " ids is too short for context " + std::to_string(context));
    std::vector<std::int32_t> inputs(batch * context), targets(batch * context);
    const std::size_t max_offset = split.size() - context - 1;
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t o = static_cast<std::size_t>(rng.below(max_offset + 1));
        for (std::size_t t = 0; t < context; ++t) {
            inputs[b * context + t] = split[o + t];
            targets[b * context + t] = split[o + t + 1];
        }
    }
    return {std::move(inputs), std::move(targets)};
}

namespace {

const char* kSpeakers[] = {
    "ANTONIO", "BEATRICE", "CLAUDIO",  "DUKE",     "EDMUND",  "FERDINAND", "GONZALO", "HELENA",
    "ISABELLA", "JULIET",  "KATHERINA", "LEONTES", "MIRANDA", "NURSE",     "ORSINO",  "PORTIA",
    "QUEEN",    "ROSALIND", "SEBASTIAN", "TOBY",   "URSULA",  "VIOLA",     "WARWICK", "YORK",
};

// Common-word pool; sampling is Zipf-weighted so the text has natural
// repetition for a character model to learn.
const char* kWords[] = {
    "the",    "and",   "to",     "of",     "i",      "you",    "my",     "a",      "that",  "in",
    "is",     "not",   "for",    "it",     "with",   "his",    "be",     "your",   "this",  "but",
    "he",     "me",    "have",   "as",     "thou",   "him",    "so",     "will",   "what",  "thy",
    "all",    "her",   "no",     "by",     "do",     "shall",  "if",     "are",    "we",    "thee",
    "on",     "lord",  "our",    "king",   "good",   "now",    "sir",    "from",   "come",  "at",
    "they",   "she",   "or",     "here",   "would",  "more",   "was",    "then",   "love",  "man",
    "their",  "which", "there",  "us",     "when",   "let",    "may",    "them",   "am",    "one",
    "like",   "upon",  "say",    "well",   "must",   "how",    "did",    "night",  "know",  "death",
    "make",   "see",   "such",   "day",    "than",   "go",     "yet",    "should", "where", "out",
    "take",   "some",  "these",  "why",    "had",    "heart",  "too",    "give",   "life",  "were",
    "who",    "most",  "can",    "men",    "time",   "hath",   "himself", "father", "eyes",  "being",
    "great",  "speak", "never",  "think",  "world",  "true",   "tell",   "been",   "own",   "other",
    "sweet",  "look",  "fair",   "could",  "honour", "soul",   "any",    "hear",   "before", "much",
    "poor",   "blood", "heaven", "name",   "again",  "hand",   "word",   "every",  "away",  "made",
    "though", "mine",  "young",  "master", "still",  "both",   "nothing", "done",  "little", "against",
    "way",    "long",  "house",  "crown",  "grace",  "madam",  "live",   "call",   "old",    "dead",
    "better", "gone",  "doth",   "very",   "once",   "said",   "down",   "keep",   "those",  "leave",
    "till",   "hast",  "noble",  "stand",  "bear",   "fear",   "friend", "son",    "daughter", "prince",
    "play",   "light", "yours",  "part",   "first",  "false",  "peace",  "war",    "sleep",  "dream",
    "sword",  "words", "quarrel", "storm", "sea",    "rest",   "land",   "right",  "wrong",  "truth",
};

constexpr std::size_t kNumWords = sizeof(kWords) / sizeof(kWords[0]);
constexpr std::size_t kNumSpeakers = sizeof(kSpeakers) / sizeof(kSpeakers[0]);

}  // namespace

std::string synthetic_playscript(std::uint64_t seed, std::size_t approx_bytes) {
    Rng rng(seed);
    // precompute Zipf CDF over the word pool
    std::vector<double> cdf(kNumWords);
    double total = 0;
    for (std::size_t i = 0; i < kNumWords; ++i) {
        total += 1.0 / double(i + 1);
        cdf[i] = total;
    }
    auto draw_word = [&]() -> const char* {
        const double u = rng.uniform() * total;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        return kWords[static_cast<std::size_t>(it - cdf.begin())];
    };

    std::string out;
    out.reserve(approx_bytes + 256);
    while (out.size() < approx_bytes) {
        out += kSpeakers[rng.below(kNumSpeakers)];
        out += ":\n";
        const std::size_t lines = 1 + rng.below(4);
        for (std::size_t l = 0; l < lines; ++l) {
            const std::size_t words = 4 + rng.below(5);
            for (std::size_t w = 0; w < words; ++w) {
                std::string word = draw_word();
                if (w == 0) word[0] = static_cast<char>(std::toupper(word[0]));
                out += word;
                if (w + 1 < words) {
                    if (w > 0 && w + 2 < words && rng.below(12) == 0) out += ",";
                    out += " ";
                }
            }
            const std::uint64_t p = rng.below(10);
            if (p == 0)
                out += "?";
            else if (p == 1)
                out += "!";
            else if (p < 5)
                out += ",";
            else
                out += (l + 1 == lines) ? "." : ";";
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

std::vector<VisionSample> synthetic_vision_set(std::size_t count, std::size_t patches,
                                               std::size_t patch_dim, Rng& rng) {
    std::vector<VisionSample> set;
    set.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::int32_t label = static_cast<std::int32_t>(rng.below(2));
        std::vector<float> vals(patches * patch_dim);
        for (auto& v : vals) v = float(rng.normal(0.0, 0.3));
        const std::size_t hot = (label == 0) ? 0 : patches - 1;
        for (std::size_t j = 0; j < patch_dim; ++j) vals[hot * patch_dim + j] += 2.0f;
        set.push_back({Tensor::from_data({patches, patch_dim}, std::move(vals)), label});
    }
    return set;
}

}  // namespace quweit
