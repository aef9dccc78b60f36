#include "sedvice/query.hpp"

#include <cctype>

namespace sedvice {

PathExpr PathExpr::arc(Term predicate) {
    if (!predicate.is_uri())
        throw rdf_error("path arc predicate must be a URI");
    PathExpr e;
    e.op = Op::Arc;
    e.predicate = std::move(predicate);
    return e;
}

PathExpr PathExpr::inv(PathExpr inner) {
    PathExpr e;
    e.op = Op::Inv;
    e.parts.push_back(std::move(inner));
    return e;
}

PathExpr PathExpr::seq(std::vector<PathExpr> parts) {
    if (parts.empty())
        throw rdf_error(":seq needs at least one part");
    PathExpr e;
    e.op = Op::Seq;
    e.parts = std::move(parts);
    return e;
}

PathExpr PathExpr::alt(std::vector<PathExpr> alternatives) {
    if (alternatives.size() < 2)
        throw rdf_error(":or needs at least two alternatives");
    PathExpr e;
    e.op = Op::Or;
    e.parts = std::move(alternatives);
    return e;
}

PathExpr PathExpr::rep_star(PathExpr inner) {
    PathExpr e;
    e.op = Op::RepStar;
    e.parts.push_back(std::move(inner));
    return e;
}

namespace {

struct Token {
    enum class Kind { Pipe, LParen, RParen, Op, Name, Uri, End } kind;
    std::string text;
    std::size_t pos;
};

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    Token next() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
        std::size_t at = pos_;
        if (pos_ >= s_.size())
            return {Token::Kind::End, {}, at};
        char c = s_[pos_];
        if (c == '|') {
            ++pos_;
            return {Token::Kind::Pipe, "|", at};
        }
        if (c == '(') {
            ++pos_;
            return {Token::Kind::LParen, "(", at};
        }
        if (c == ')') {
            ++pos_;
            return {Token::Kind::RParen, ")", at};
        }
        if (c == '!') {
            // interning marker; skip it and lex the name that follows
            ++pos_;
            Token t = next();
            if (t.kind != Token::Kind::Name && t.kind != Token::Kind::Uri)
                throw parse_error("'!' must precede a name", at);
            t.pos = at;
            return t;
        }
        if (c == '<') {
            auto close = s_.find('>', pos_);
            if (close == std::string_view::npos)
                throw parse_error("unterminated <uri>", at);
            pos_ = close + 1;
            return {Token::Kind::Uri, std::string(s_.substr(at + 1, close - at - 1)), at};
        }
        while (pos_ < s_.size()) {
            char d = s_[pos_];
            if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')' || d == '|' || d == '<')
                break;
            ++pos_;
        }
        std::string word(s_.substr(at, pos_ - at));
        if (word.front() == ':')
            return {Token::Kind::Op, std::move(word), at};
        return {Token::Kind::Name, std::move(word), at};
    }

    std::size_t end() const { return s_.size(); }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    Parser(std::string_view text, const NamespaceTable& ns) : lex_(text), ns_(ns) { advance(); }

    PathQuery query() {
        Term start = name_term("start node");
        if (tok_.kind != Token::Kind::Pipe)
            throw parse_error("expected '|'", tok_.pos);
        advance();
        if (tok_.kind == Token::Kind::End)
            throw parse_error("empty path", tok_.pos);
        PathExpr path = expr();
        if (tok_.kind != Token::Kind::End)
            throw parse_error("unexpected trailing input", tok_.pos);
        return PathQuery{std::move(start), std::move(path)};
    }

private:
    void advance() { tok_ = lex_.next(); }

    Term name_term(const char* what) {
        if (tok_.kind == Token::Kind::Uri) {
            if (tok_.text.empty())
                throw parse_error("empty <uri>", tok_.pos);
            Term t = make_uri(tok_.text, tok_.pos);
            advance();
            return t;
        }
        if (tok_.kind == Token::Kind::Name) {
            std::string expanded;
            try {
                expanded = ns_.expand(tok_.text);
            } catch (const rdf_error& e) {
                throw parse_error(e.what(), tok_.pos);
            }
            Term t = make_uri(expanded, tok_.pos);
            advance();
            return t;
        }
        if (tok_.kind == Token::Kind::End)
            throw parse_error(std::string("expected ") + what + ", found end of input", tok_.pos);
        throw parse_error(std::string("expected ") + what, tok_.pos);
    }

    static Term make_uri(const std::string& text, std::size_t pos) {
        try {
            return Term::uri(text);
        } catch (const rdf_error& e) {
            throw parse_error(e.what(), pos);
        }
    }

    PathExpr expr() {
        if (tok_.kind == Token::Kind::LParen) {
            advance();
            if (tok_.kind != Token::Kind::Op)
                throw parse_error(tok_.kind == Token::Kind::End ? "unbalanced parenthesis" : "expected operator",
                                  tok_.pos);
            Token op = tok_;
            if (op.text != ":seq" && op.text != ":inv" && op.text != ":or" && op.text != ":rep*")
                throw parse_error("unknown operator " + op.text, op.pos);
            advance();
            std::vector<PathExpr> parts;
            while (tok_.kind != Token::Kind::RParen) {
                if (tok_.kind == Token::Kind::End)
                    throw parse_error("unbalanced parenthesis", lex_.end());
                parts.push_back(expr());
            }
            advance();
            if (op.text == ":seq") {
                if (parts.empty())
                    throw parse_error(":seq needs at least one argument", op.pos);
                return PathExpr::seq(std::move(parts));
            }
            if (op.text == ":or") {
                if (parts.size() < 2)
                    throw parse_error(":or needs at least two arguments", op.pos);
                return PathExpr::alt(std::move(parts));
            }
            if (parts.size() != 1)
                throw parse_error(op.text + " takes exactly one argument", op.pos);
            if (op.text == ":inv")
                return PathExpr::inv(std::move(parts.front()));
            return PathExpr::rep_star(std::move(parts.front()));
        }
        if (tok_.kind == Token::Kind::Name || tok_.kind == Token::Kind::Uri)
            return PathExpr::arc(name_term("arc"));
        if (tok_.kind == Token::Kind::End)
            throw parse_error("empty path", tok_.pos);
        throw parse_error("unexpected '" + tok_.text + "'", tok_.pos);
    }

    Lexer lex_;
    const NamespaceTable& ns_;
    Token tok_{Token::Kind::End, {}, 0};
};

} // namespace

PathQuery parse_path_query(std::string_view text, const NamespaceTable& ns) {
    Parser p(text, ns);
    return p.query();
}

std::string render(const PathExpr& e) {
    switch (e.op) {
    case PathExpr::Op::Arc: return "<" + e.predicate->value() + ">";
    case PathExpr::Op::Inv: return "(:inv " + render(e.parts.front()) + ")";
    case PathExpr::Op::RepStar: return "(:rep* " + render(e.parts.front()) + ")";
    case PathExpr::Op::Seq:
    case PathExpr::Op::Or: {
        std::string out = e.op == PathExpr::Op::Seq ? "(:seq" : "(:or";
        for (const auto& p : e.parts)
            out += " " + render(p);
        return out + ")";
    }
    }
    return {};
}

std::string render(const PathQuery& q) { return "<" + q.start.value() + "> | " + render(q.path); }

} // namespace sedvice
