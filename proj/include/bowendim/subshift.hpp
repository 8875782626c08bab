#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "bowendim/common.hpp"

namespace bowendim {

using Symbol = std::uint32_t;
using Word = std::vector<Symbol>;

inline std::string word_to_string(const Word& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s.push_back('.');
    s += std::to_string(w[i]);
  }
  return s;
}

// One-step topological Markov chain: alphabet {0..l-1} plus a 0/1 transition
// matrix. Symbol b may follow symbol a iff allowed(a,b). Every symbol must be
// bi-extendable (no empty rows or columns). Immutable after construction.
class Subshift {
 public:
  Subshift(std::size_t alphabet, std::vector<std::uint8_t> transitions)
      : l_(alphabet), t_(std::move(transitions)) {
    if (l_ == 0) throw SchemaError("alphabet must be nonempty");
    if (t_.size() != l_ * l_)
      throw SchemaError("transition matrix must be alphabet_size^2 entries");
    for (auto v : t_)
      if (v > 1) throw SchemaError("transition entries must be 0 or 1");
    for (std::size_t i = 0; i < l_; ++i) {
      bool row = false, col = false;
      for (std::size_t j = 0; j < l_; ++j) {
        row |= t_[i * l_ + j] != 0;
        col |= t_[j * l_ + i] != 0;
      }
      if (!row) throw SchemaError("symbol " + std::to_string(i) + " has no successor");
      if (!col) throw SchemaError("symbol " + std::to_string(i) + " has no predecessor");
    }
    succ_.resize(l_);
    for (std::size_t i = 0; i < l_; ++i)
      for (std::size_t j = 0; j < l_; ++j)
        if (t_[i * l_ + j]) succ_[i].push_back(static_cast<Symbol>(j));
    irreducible_ = strongly_connected();
  }

  static Subshift full(std::size_t alphabet) {
    return Subshift(alphabet, std::vector<std::uint8_t>(alphabet * alphabet, 1));
  }

  static Subshift golden_mean() {  // forbids the word "11"
    return Subshift(2, {1, 1, 1, 0});
  }

  std::size_t alphabet_size() const { return l_; }
  bool allowed(Symbol a, Symbol b) const { return t_[a * l_ + b] != 0; }
  bool irreducible() const { return irreducible_; }
  const std::vector<Symbol>& successors(Symbol a) const { return succ_[a]; }

  bool admissible(const Word& w) const {
    if (w.empty()) return false;
    for (Symbol s : w)
      if (s >= l_) return false;
    for (std::size_t t = 0; t + 1 < w.size(); ++t)
      if (!allowed(w[t], w[t + 1])) return false;
    return true;
  }

  void require_irreducible(const char* op) const {
    if (!irreducible_)
      throw std::invalid_argument(std::string(op) + " requires an irreducible subshift");
  }

 private:
  bool strongly_connected() const {
    auto reach = [&](bool forward) {
      std::vector<char> seen(l_, 0);
      std::deque<std::size_t> q{0};
      seen[0] = 1;
      std::size_t count = 1;
      while (!q.empty()) {
        std::size_t a = q.front();
        q.pop_front();
        for (std::size_t b = 0; b < l_; ++b) {
          bool edge = forward ? t_[a * l_ + b] : t_[b * l_ + a];
          if (edge && !seen[b]) {
            seen[b] = 1;
            ++count;
            q.push_back(b);
          }
        }
      }
      return count == l_;
    };
    return reach(true) && reach(false);
  }

  std::size_t l_;
  std::vector<std::uint8_t> t_;
  std::vector<std::vector<Symbol>> succ_;
  bool irreducible_ = false;
};

// Number of admissible n-words, by iterating the integer transition matrix on
// the all-ones count vector. Overflow is an error, never wraparound.
inline std::uint64_t count_words(const Subshift& s, std::size_t n) {
  if (n == 0) throw std::invalid_argument("count_words: n must be >= 1");
  const std::size_t l = s.alphabet_size();
  std::vector<std::uint64_t> counts(l, 1);  // counts[a] = #words of current length starting at a
  for (std::size_t step = 1; step < n; ++step) {
    std::vector<std::uint64_t> next(l, 0);
    for (std::size_t a = 0; a < l; ++a) {
      std::uint64_t acc = 0;
      for (Symbol b : s.successors(static_cast<Symbol>(a)))
        acc = checked_add(acc, counts[b], "count_words");
      next[a] = acc;
    }
    counts.swap(next);
  }
  std::uint64_t total = 0;
  for (auto c : counts) total = checked_add(total, c, "count_words");
  return total;
}

// All admissible n-words, lexicographically ordered.
inline std::vector<Word> admissible_words(const Subshift& s, std::size_t n,
                                          const Caps& caps = {}) {
  if (n == 0) throw std::invalid_argument("admissible_words: n must be >= 1");
  std::uint64_t total;
  try {
    total = count_words(s, n);
  } catch (const CountOverflow&) {
    throw CapExceeded("admissible_words: count overflows 64 bits, above max_words cap");
  }
  if (total > caps.max_words)
    throw CapExceeded("admissible_words: " + std::to_string(total) +
                      " words exceeds max_words cap " + std::to_string(caps.max_words));
  std::vector<Word> out;
  out.reserve(static_cast<std::size_t>(total));
  Word w;
  w.reserve(n);
  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (depth == n) {
      out.push_back(w);
      return;
    }
    if (depth == 0) {
      for (Symbol a = 0; a < s.alphabet_size(); ++a) {
        w.push_back(a);
        self(self, 1);
        w.pop_back();
      }
    } else {
      for (Symbol b : s.successors(w.back())) {
        w.push_back(b);
        self(self, depth + 1);
        w.pop_back();
      }
    }
  };
  rec(rec, 0);
  return out;
}

// Lexicographic rank lookup among the admissible n-words (words must be the
// lex-sorted output of admissible_words).
inline std::size_t word_rank(const std::vector<Word>& words, const Word& w) {
  auto it = std::lower_bound(words.begin(), words.end(), w);
  if (it == words.end() || *it != w)
    throw std::invalid_argument("word_rank: word not in list: " + word_to_string(w));
  return static_cast<std::size_t>(it - words.begin());
}

struct PowerSubshift {
  Subshift shift;            // alphabet = admissible N-words of the base, lex order
  std::vector<Word> words;   // power symbol k  <->  words[k]
};

// N-th power system: symbols are the admissible N-words of the base shift;
// w may be followed by w' iff the concatenation w.w' is base-admissible,
// which reduces to the junction pair (last of w, first of w').
inline PowerSubshift power_subshift_with_alphabet(const Subshift& s, std::size_t n,
                                                  const Caps& caps = {}) {
  if (n == 0) throw std::invalid_argument("power_subshift: N must be >= 1");
  std::uint64_t total;
  try {
    total = count_words(s, n);
  } catch (const CountOverflow&) {
    throw CapExceeded("power_subshift: alphabet size overflows 64 bits");
  }
  if (total > caps.max_power_alphabet)
    throw CapExceeded("power_subshift: alphabet " + std::to_string(total) +
                      " exceeds max_power_alphabet cap " +
                      std::to_string(caps.max_power_alphabet));
  auto words = admissible_words(s, n, caps);
  const std::size_t m = words.size();
  std::vector<std::uint8_t> t(m * m, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      t[i * m + j] = s.allowed(words[i].back(), words[j].front()) ? 1 : 0;
  return PowerSubshift{Subshift(m, std::move(t)), std::move(words)};
}

inline Subshift power_subshift(const Subshift& s, std::size_t n, const Caps& caps = {}) {
  return power_subshift_with_alphabet(s, n, caps).shift;
}

}  // namespace bowendim
