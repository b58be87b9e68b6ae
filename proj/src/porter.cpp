#include <string>
#include <string_view>

#include "dialcoord/metrics.hpp"

namespace dialcoord {

namespace {

class PorterStemmer {
public:
    explicit PorterStemmer(std::string_view word) : b_(word), k_(static_cast<int>(word.size()) - 1) {}

    std::string run() {
        if (k_ <= 1) return b_;
        step1ab();
        if (k_ > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        return b_.substr(0, static_cast<std::size_t>(k_ + 1));
    }

private:
    char at(int i) const { return b_[static_cast<std::size_t>(i)]; }

    bool cons(int i) const {
        switch (at(i)) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !cons(i - 1);
            default: return true;
        }
    }

    // number of VC sequences in b[0..j]
    int m() const {
        int n = 0;
        int i = 0;
        for (;;) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        for (;;) {
            for (;;) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            for (;;) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool doublec(int j) const { return j >= 1 && at(j) == at(j - 1) && cons(j); }

    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        const char ch = at(i);
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        const int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (std::string_view(b_).substr(static_cast<std::size_t>(k_ + 1 - len), s.size()) != s) return false;
        j_ = k_ - len;
        return true;
    }

    void setto(std::string_view s) {
        b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
        k_ = j_ + static_cast<int>(s.size());
        b_.resize(static_cast<std::size_t>(k_ + 1));
    }

    void r(std::string_view s) {
        if (m() > 0) setto(s);
    }

    void step1ab() {
        if (at(k_) == 's') {
            if (ends("sses")) k_ -= 2;
            else if (ends("ies")) setto("i");
            else if (at(k_ - 1) != 's') --k_;
            b_.resize(static_cast<std::size_t>(k_ + 1));
        }
        if (ends("eed")) {
            if (m() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            b_.resize(static_cast<std::size_t>(k_ + 1));
            if (ends("at")) setto("ate");
            else if (ends("bl")) setto("ble");
            else if (ends("iz")) setto("ize");
            else if (doublec(k_)) {
                --k_;
                const char ch = at(k_);
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else {
                j_ = k_;
                if (m() == 1 && cvc(k_)) {
                    b_.resize(static_cast<std::size_t>(k_ + 1));
                    b_ += 'e';
                    ++k_;
                }
            }
        }
        b_.resize(static_cast<std::size_t>(k_ + 1));
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
    }

    // First suffix that matches decides; replacement only if the stem measure allows it.
    template <std::size_t N>
    void replace_first(const std::pair<std::string_view, std::string_view> (&rules)[N]) {
        for (const auto& [suffix, repl] : rules) {
            if (ends(suffix)) {
                r(repl);
                return;
            }
        }
    }

    void step2() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},    {"izer", "ize"},
            {"bli", "ble"},     {"alli", "al"},     {"entli", "ent"},  {"eli", "e"},        {"ousli", "ous"},
            {"ization", "ize"}, {"ation", "ate"},   {"ator", "ate"},   {"alism", "al"},     {"iveness", "ive"},
            {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},   {"iviti", "ive"},    {"biliti", "ble"},
            {"logi", "log"},
        };
        if (k_ < 1) return;
        replace_first(rules);
    }

    void step3() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        };
        replace_first(rules);
    }

    void step4() {
        static constexpr std::string_view suffixes[] = {
            "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
            "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize",
        };
        if (k_ < 1) return;
        for (auto s : suffixes) {
            if (!ends(s)) continue;
            if (s == "ion") {
                if (j_ < 0 || (at(j_) != 's' && at(j_) != 't')) continue;  // may still end in "ou"
            }
            if (m() > 1) {
                k_ = j_;
                b_.resize(static_cast<std::size_t>(k_ + 1));
            }
            return;
        }
    }

    void step5() {
        j_ = k_;
        if (at(k_) == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
        }
        if (at(k_) == 'l' && doublec(k_) && m() > 1) --k_;
        b_.resize(static_cast<std::size_t>(k_ + 1));
    }

    std::string b_;
    int k_;
    int j_ = 0;
};

bool is_lower_alpha(std::string_view w) {
    for (char c : w) {
        if (c < 'a' || c > 'z') return false;
    }
    return true;
}

}  // namespace

std::string porter_stem(std::string_view word) {
    if (word.size() <= 2 || !is_lower_alpha(word)) return std::string(word);
    return PorterStemmer(word).run();
}

}  // namespace dialcoord
