#include "sedvice/rdf.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace sedvice {

namespace {

bool has_whitespace(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

void require_uri_text(const std::string& value, const char* what) {
    if (value.empty())
        throw rdf_error(std::string(what) + ": empty URI");
    if (has_whitespace(value))
        throw rdf_error(std::string(what) + ": URI contains whitespace: " + value);
}

} // namespace

Term Term::uri(std::string value) {
    require_uri_text(value, "uri term");
    return Term(TermKind::Uri, std::move(value), std::nullopt);
}

Term Term::literal(std::string lexical, std::optional<std::string> datatype) {
    if (datatype)
        require_uri_text(*datatype, "literal datatype");
    return Term(TermKind::Literal, std::move(lexical), std::move(datatype));
}

Term Term::blank(std::string label) {
    if (label.empty() || has_whitespace(label))
        throw rdf_error("blank node label must be non-empty without whitespace");
    return Term(TermKind::Blank, std::move(label), std::nullopt);
}

std::strong_ordering operator<=>(const Term& a, const Term& b) {
    if (auto c = static_cast<int>(a.kind_) <=> static_cast<int>(b.kind_); c != 0)
        return c;
    if (auto c = a.value_.compare(b.value_); c != 0)
        return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    if (a.datatype_.has_value() != b.datatype_.has_value())
        return a.datatype_.has_value() ? std::strong_ordering::greater : std::strong_ordering::less;
    if (!a.datatype_)
        return std::strong_ordering::equal;
    auto c = a.datatype_->compare(*b.datatype_);
    if (c == 0)
        return std::strong_ordering::equal;
    return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
}

bool is_valid_triple(const Term& s, const Term& p, const Term& o) noexcept {
    (void)o;
    return p.is_uri() && !s.is_literal();
}

Triple::Triple(Term s, Term p, Term o)
    : subject(std::move(s)), predicate(std::move(p)), object(std::move(o)) {
    if (!predicate.is_uri())
        throw rdf_error("triple predicate must be a URI");
    if (subject.is_literal())
        throw rdf_error("triple subject must not be a literal");
}

std::vector<Triple> Graph::with_subject(const Term& subject) const {
    // The probe key sorts before every real predicate of the same subject.
    std::vector<Triple> out;
    for (auto it = triples_.lower_bound(Triple(subject, Term::uri("\x01"), Term::uri("\x01")));
         it != triples_.end() && it->subject == subject; ++it)
        out.push_back(*it);
    return out;
}

Graph graph_merge(const Graph& a, const Graph& b) {
    Graph::container out = a.triples();
    out.insert(b.begin(), b.end());
    return Graph(std::move(out));
}

GraphDiff graph_diff(const Graph& a, const Graph& b) {
    GraphDiff d;
    Graph::container added, removed;
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::inserter(added, added.end()));
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(removed, removed.end()));
    d.added = Graph(std::move(added));
    d.removed = Graph(std::move(removed));
    return d;
}

namespace {

// Binds one slot against a concrete term; false on conflict.
bool bind_slot(const PatternSlot& slot, const Term& value, Binding& b) {
    if (const auto* t = std::get_if<Term>(&slot))
        return *t == value;
    if (const auto* v = std::get_if<Variable>(&slot)) {
        auto [it, inserted] = b.emplace(v->name, value);
        return inserted || it->second == value;
    }
    return true;
}

const Term* concrete(const PatternSlot& slot) { return std::get_if<Term>(&slot); }

} // namespace

BindingSet match_pattern(const Graph& graph, const TriplePattern& pattern) {
    BindingSet out;
    auto try_triple = [&](const Triple& t) {
        Binding b;
        if (bind_slot(pattern.subject, t.subject, b) && bind_slot(pattern.predicate, t.predicate, b) &&
            bind_slot(pattern.object, t.object, b))
            out.insert(std::move(b));
    };
    if (const Term* s = concrete(pattern.subject)) {
        if (s->is_literal())
            return out;
        for (const auto& t : graph.with_subject(*s))
            try_triple(t);
    } else {
        for (const auto& t : graph)
            try_triple(t);
    }
    return out;
}

std::optional<Triple> substitute(const TriplePattern& pattern, const Binding& binding) {
    auto resolve = [&](const PatternSlot& slot) -> std::optional<Term> {
        if (const auto* t = std::get_if<Term>(&slot))
            return *t;
        if (const auto* v = std::get_if<Variable>(&slot)) {
            auto it = binding.find(v->name);
            if (it != binding.end())
                return it->second;
        }
        return std::nullopt;
    };
    auto s = resolve(pattern.subject), p = resolve(pattern.predicate), o = resolve(pattern.object);
    if (!s || !p || !o || !is_valid_triple(*s, *p, *o))
        return std::nullopt;
    return Triple(*s, *p, *o);
}

NamespaceTable NamespaceTable::standard() {
    return NamespaceTable{{"rdf", std::string(vocab::rdf)},
                          {"rdfs", std::string(vocab::rdfs)},
                          {"owl", std::string(vocab::owl)},
                          {"xsd", std::string(vocab::xsd)}};
}

void NamespaceTable::add(const std::string& prefix, const std::string& base) {
    if (prefix.find_first_of(":#") != std::string::npos || has_whitespace(prefix))
        throw rdf_error("invalid namespace prefix: " + prefix);
    map_[prefix] = base;
}

std::optional<std::string> NamespaceTable::base(const std::string& prefix) const {
    auto it = map_.find(prefix);
    if (it == map_.end())
        return std::nullopt;
    return it->second;
}

std::string NamespaceTable::expand(std::string_view name) const {
    auto sep = name.find_first_of(":#");
    std::string prefix, local;
    if (sep == std::string_view::npos) {
        local = std::string(name);
    } else {
        prefix = std::string(name.substr(0, sep));
        local = std::string(name.substr(sep + 1));
    }
    auto b = base(prefix);
    if (!b)
        throw rdf_error(prefix.empty() ? "no default namespace for name '" + std::string(name) + "'"
                                       : "unknown prefix '" + prefix + "'");
    return *b + local;
}

namespace vocab {
Term rdf_type() { return Term::uri(std::string(rdf) + "type"); }
Term rdfs_subclass_of() { return Term::uri(std::string(rdfs) + "subClassOf"); }
Term owl_same_as() { return Term::uri(std::string(owl) + "sameAs"); }
} // namespace vocab

namespace {

std::string escape_literal(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out;
}

class TextReader {
public:
    explicit TextReader(std::string_view s) : s_(s) {}

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    std::size_t pos() const { return pos_; }

    Term term() {
        skip_ws();
        char c = peek();
        if (c == '<') {
            auto close = s_.find('>', pos_);
            if (close == std::string_view::npos)
                fail("unterminated URI");
            std::string v(s_.substr(pos_ + 1, close - pos_ - 1));
            pos_ = close + 1;
            return Term::uri(std::move(v));
        }
        if (c == '"') {
            std::string v;
            ++pos_;
            for (;;) {
                if (at_end())
                    fail("unterminated literal");
                char ch = s_[pos_++];
                if (ch == '"')
                    break;
                if (ch == '\\') {
                    if (at_end())
                        fail("dangling escape");
                    char e = s_[pos_++];
                    switch (e) {
                    case 'n': v += '\n'; break;
                    case 'r': v += '\r'; break;
                    case 't': v += '\t'; break;
                    case '"': v += '"'; break;
                    case '\\': v += '\\'; break;
                    default: fail("unknown escape");
                    }
                } else {
                    v += ch;
                }
            }
            if (s_.substr(pos_, 3) == "^^<") {
                pos_ += 2;
                Term dt = term();
                return Term::literal(std::move(v), dt.value());
            }
            return Term::literal(std::move(v));
        }
        if (s_.substr(pos_, 2) == "_:") {
            pos_ += 2;
            auto start = pos_;
            while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())))
                ++pos_;
            return Term::blank(std::string(s_.substr(start, pos_ - start)));
        }
        fail("expected term");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw rdf_error(msg + " at offset " + std::to_string(pos_));
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace

std::string to_text(const Term& t) {
    switch (t.kind()) {
    case TermKind::Uri: return "<" + t.value() + ">";
    case TermKind::Blank: return "_:" + t.value();
    case TermKind::Literal: {
        std::string out = "\"" + escape_literal(t.value()) + "\"";
        if (t.datatype())
            out += "^^<" + *t.datatype() + ">";
        return out;
    }
    }
    return {};
}

std::string to_text(const Triple& t) {
    return to_text(t.subject) + " " + to_text(t.predicate) + " " + to_text(t.object) + " .";
}

std::string to_text(const Graph& g) {
    std::string out;
    for (const auto& t : g) {
        out += to_text(t);
        out += '\n';
    }
    return out;
}

Term parse_term(std::string_view text) {
    TextReader r(text);
    Term t = r.term();
    r.skip_ws();
    if (!r.at_end())
        r.fail("trailing characters after term");
    return t;
}

Triple parse_triple(std::string_view line) {
    TextReader r(line);
    Term s = r.term();
    Term p = r.term();
    Term o = r.term();
    r.skip_ws();
    if (r.peek() != '.')
        r.fail("expected ' .' terminator");
    return Triple(std::move(s), std::move(p), std::move(o));
}

Graph parse_graph(std::string_view text) {
    Graph g;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        auto first = line.find_first_not_of(" \t\r");
        if (first != std::string_view::npos && line[first] != '#')
            g.insert(parse_triple(line));
        if (nl == std::string_view::npos)
            break;
        start = nl + 1;
    }
    return g;
}

} // namespace sedvice
