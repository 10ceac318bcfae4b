#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "loopverify/error.hpp"

namespace loopverify {

/// A parsed S-expression: either an atom or a parenthesised list.
struct SExpr {
    bool is_list = false;
    std::string atom;
    std::vector<SExpr> items;
    std::size_t position = 0;

    bool is_atom(std::string_view s) const { return !is_list && atom == s; }
    std::string_view head() const
    {
        if (is_list && !items.empty() && !items.front().is_list) return items.front().atom;
        return {};
    }
};

namespace detail {

class SExprReader {
public:
    explicit SExprReader(std::string_view text) : text_(text) {}

    SExpr read_all()
    {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        SExpr e = read();
        skip_space();
        if (pos_ < text_.size()) throw ParseError("trailing characters after expression", pos_);
        return e;
    }

private:
    void skip_space()
    {
        while (pos_ < text_.size()) {
            if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            } else if (text_[pos_] == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    SExpr read()
    {
        SExpr e;
        e.position = pos_;
        if (text_[pos_] == ')') throw ParseError("unexpected ')'", pos_);
        if (text_[pos_] == '(') {
            e.is_list = true;
            ++pos_;
            for (;;) {
                skip_space();
                if (pos_ >= text_.size()) throw ParseError("unbalanced '('", e.position);
                if (text_[pos_] == ')') {
                    ++pos_;
                    return e;
                }
                e.items.push_back(read());
            }
        }
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != ';')
            ++pos_;
        e.atom = std::string(text_.substr(start, pos_ - start));
        return e;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline SExpr parse_sexpr(std::string_view text)
{
    return detail::SExprReader(text).read_all();
}

} // namespace loopverify
