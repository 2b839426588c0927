#include "caesar/pdf.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <utility>

#include "caesar/error.hpp"
#include "caesar/text.hpp"

namespace caesar::pdf {

namespace {

struct Object;
using Array = std::vector<Object>;
using Dict = std::vector<std::pair<std::string, Object>>;

struct Object {
    enum class Kind { Null, Bool, Number, String, Name, Array, Dict, Ref, Stream, Keyword };
    Kind kind = Kind::Null;
    bool boolean = false;
    double number = 0.0;
    std::string str;  // String bytes, Name, Keyword
    std::shared_ptr<Array> array;
    std::shared_ptr<Dict> dict;
    int ref_num = 0;
    int ref_gen = 0;
    std::string stream_data;  // raw (undecoded)

    const Object* get(std::string_view key) const {
        if (!dict) return nullptr;
        for (const auto& [k, v] : *dict) {
            if (k == key) return &v;
        }
        return nullptr;
    }
    bool is_name(std::string_view n) const { return kind == Kind::Name && str == n; }
};

bool is_ws(char ch) {
    return ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t' || ch == '\f' || ch == '\0';
}
bool is_delim(char ch) {
    return ch == '(' || ch == ')' || ch == '<' || ch == '>' || ch == '[' || ch == ']' || ch == '{' || ch == '}' ||
           ch == '/' || ch == '%';
}

class Lexer {
public:
    explicit Lexer(std::string_view s, std::size_t pos = 0) : s_(s), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    bool eof() { skip(); return pos_ >= s_.size(); }

    void skip() {
        while (pos_ < s_.size()) {
            if (is_ws(s_[pos_])) {
                ++pos_;
            } else if (s_[pos_] == '%') {
                while (pos_ < s_.size() && s_[pos_] != '\n' && s_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    // Parses one object; references "n g R" are folded. Keywords come back as Kind::Keyword.
    std::optional<Object> next(int depth = 0) {
        if (depth > 64) return std::nullopt;
        skip();
        if (pos_ >= s_.size()) return std::nullopt;
        char ch = s_[pos_];
        Object o;
        if (ch == '(') {
            o.kind = Object::Kind::String;
            o.str = literal_string();
            return o;
        }
        if (ch == '<' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '<') {
            pos_ += 2;
            o.kind = Object::Kind::Dict;
            o.dict = std::make_shared<Dict>();
            while (true) {
                skip();
                if (pos_ >= s_.size()) break;
                if (s_.substr(pos_, 2) == ">>") {
                    pos_ += 2;
                    break;
                }
                auto key = next(depth + 1);
                if (!key) break;
                if (key->kind != Object::Kind::Name) continue;
                auto value = next(depth + 1);
                if (!value) break;
                o.dict->emplace_back(key->str, std::move(*value));
            }
            return o;
        }
        if (ch == '<') {
            o.kind = Object::Kind::String;
            o.str = hex_string();
            return o;
        }
        if (ch == '[') {
            ++pos_;
            o.kind = Object::Kind::Array;
            o.array = std::make_shared<Array>();
            while (true) {
                skip();
                if (pos_ >= s_.size()) break;
                if (s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                auto item = next(depth + 1);
                if (!item) break;
                o.array->push_back(std::move(*item));
            }
            return o;
        }
        if (ch == '/') {
            ++pos_;
            o.kind = Object::Kind::Name;
            while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) {
                if (s_[pos_] == '#' && pos_ + 2 < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[pos_ + 1])) &&
                    std::isxdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
                    o.str.push_back(static_cast<char>(std::stoi(std::string(s_.substr(pos_ + 1, 2)), nullptr, 16)));
                    pos_ += 3;
                } else {
                    o.str.push_back(s_[pos_++]);
                }
            }
            return o;
        }
        if (ch == ')' || ch == '>' || ch == ']' || ch == '{' || ch == '}') {
            ++pos_;
            o.kind = Object::Kind::Keyword;
            o.str = std::string(1, ch);
            return o;
        }
        std::size_t b = pos_;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && !is_delim(s_[pos_])) ++pos_;
        std::string_view tok = s_.substr(b, pos_ - b);
        if (tok.empty()) {
            ++pos_;
            return next(depth);
        }
        if (is_number(tok)) {
            o.kind = Object::Kind::Number;
            o.number = std::strtod(std::string(tok).c_str(), nullptr);
            // fold "n g R"
            if (is_integer(tok)) {
                std::size_t save = pos_;
                skip();
                std::size_t b2 = pos_;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
                if (pos_ > b2) {
                    std::string_view gen = s_.substr(b2, pos_ - b2);
                    skip();
                    if (pos_ < s_.size() && s_[pos_] == 'R' &&
                        (pos_ + 1 >= s_.size() || is_ws(s_[pos_ + 1]) || is_delim(s_[pos_ + 1]))) {
                        ++pos_;
                        o.kind = Object::Kind::Ref;
                        o.ref_num = static_cast<int>(o.number);
                        o.ref_gen = std::atoi(std::string(gen).c_str());
                        return o;
                    }
                }
                pos_ = save;
            }
            return o;
        }
        if (tok == "true" || tok == "false") {
            o.kind = Object::Kind::Bool;
            o.boolean = tok == "true";
            return o;
        }
        if (tok == "null") return o;
        o.kind = Object::Kind::Keyword;
        o.str = std::string(tok);
        return o;
    }

private:
    static bool is_integer(std::string_view t) {
        std::size_t i = (t[0] == '+' || t[0] == '-') ? 1 : 0;
        if (i >= t.size()) return false;
        for (; i < t.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
        }
        return true;
    }
    static bool is_number(std::string_view t) {
        std::size_t i = (t[0] == '+' || t[0] == '-') ? 1 : 0;
        bool digits = false, dot = false;
        for (; i < t.size(); ++i) {
            if (std::isdigit(static_cast<unsigned char>(t[i]))) digits = true;
            else if (t[i] == '.' && !dot) dot = true;
            else return false;
        }
        return digits;
    }

    std::string literal_string() {
        std::string out;
        ++pos_;  // (
        int depth = 1;
        while (pos_ < s_.size()) {
            char c = s_[pos_++];
            if (c == '\\' && pos_ < s_.size()) {
                char e = s_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 'r': out.push_back('\r'); break;
                    case 't': out.push_back('\t'); break;
                    case 'b': out.push_back('\b'); break;
                    case 'f': out.push_back('\f'); break;
                    case '\r':
                        if (pos_ < s_.size() && s_[pos_] == '\n') ++pos_;
                        break;
                    case '\n': break;
                    default:
                        if (e >= '0' && e <= '7') {
                            int v = e - '0';
                            for (int k = 0; k < 2 && pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '7'; ++k) {
                                v = v * 8 + (s_[pos_++] - '0');
                            }
                            out.push_back(static_cast<char>(v & 0xFF));
                        } else {
                            out.push_back(e);
                        }
                }
            } else if (c == '(') {
                ++depth;
                out.push_back(c);
            } else if (c == ')') {
                if (--depth == 0) break;
                out.push_back(c);
            } else {
                out.push_back(c);
            }
        }
        return out;
    }

    std::string hex_string() {
        ++pos_;  // <
        std::string digits;
        while (pos_ < s_.size() && s_[pos_] != '>') {
            if (std::isxdigit(static_cast<unsigned char>(s_[pos_]))) digits.push_back(s_[pos_]);
            ++pos_;
        }
        if (pos_ < s_.size()) ++pos_;
        if (digits.size() % 2) digits.push_back('0');
        std::string out;
        for (std::size_t i = 0; i < digits.size(); i += 2) {
            out.push_back(static_cast<char>(std::stoi(digits.substr(i, 2), nullptr, 16)));
        }
        return out;
    }

    std::string_view s_;
    std::size_t pos_;
};

std::string ascii_hex_decode(std::string_view data) {
    std::string digits;
    for (char c : data) {
        if (c == '>') break;
        if (std::isxdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    }
    if (digits.size() % 2) digits.push_back('0');
    std::string out;
    for (std::size_t i = 0; i < digits.size(); i += 2) {
        out.push_back(static_cast<char>(std::stoi(digits.substr(i, 2), nullptr, 16)));
    }
    return out;
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) { scan(); }

    const Object* resolve(const Object* o, int hops = 0) const {
        while (o && o->kind == Object::Kind::Ref && hops++ < 32) {
            auto it = objects_.find(o->ref_num);
            o = it == objects_.end() ? nullptr : &it->second;
        }
        return o;
    }

    const std::map<int, Object>& objects() const { return objects_; }

    std::optional<std::string> decode_stream(const Object& stream) const {
        std::string data = stream.stream_data;
        const Object* filter = resolve(stream.get("Filter"));
        std::vector<std::string> filters;
        if (filter && filter->kind == Object::Kind::Name) filters.push_back(filter->str);
        if (filter && filter->kind == Object::Kind::Array) {
            for (const auto& f : *filter->array) {
                if (f.kind == Object::Kind::Name) filters.push_back(f.str);
            }
        }
        for (const auto& f : filters) {
            if (f == "FlateDecode" || f == "Fl") {
                data = inflate(data);
            } else if (f == "ASCIIHexDecode" || f == "AHx") {
                data = ascii_hex_decode(data);
            } else {
                return std::nullopt;
            }
        }
        return data;
    }

private:
    void scan() {
        // Locate every "<num> <gen> obj" header; later definitions win.
        std::size_t pos = 0;
        while ((pos = data_.find("obj", pos)) != std::string_view::npos) {
            std::size_t kw = pos;
            pos += 3;
            if (kw >= 3 && data_.substr(kw - 3, 3) == "end") continue;
            if (pos < data_.size() && !is_ws(data_[pos]) && !is_delim(data_[pos])) continue;
            std::size_t i = kw;
            auto back_int = [&](std::size_t& idx) -> std::optional<int> {
                while (idx > 0 && is_ws(data_[idx - 1])) --idx;
                std::size_t end = idx;
                while (idx > 0 && std::isdigit(static_cast<unsigned char>(data_[idx - 1]))) --idx;
                if (idx == end) return std::nullopt;
                return std::atoi(std::string(data_.substr(idx, end - idx)).c_str());
            };
            auto gen = back_int(i);
            if (!gen) continue;
            auto num = back_int(i);
            if (!num) continue;
            Lexer lex(data_, pos);
            auto obj = lex.next();
            if (!obj) continue;
            if (obj->kind == Object::Kind::Dict) {
                std::size_t after = lex.pos();
                lex.skip();
                if (data_.substr(lex.pos(), 6) == "stream") {
                    std::size_t start = lex.pos() + 6;
                    if (start < data_.size() && data_[start] == '\r') ++start;
                    if (start < data_.size() && data_[start] == '\n') ++start;
                    std::optional<std::size_t> len;
                    const Object* l = obj->get("Length");
                    if (l && l->kind == Object::Kind::Number && l->number >= 0) {
                        auto n = static_cast<std::size_t>(l->number);
                        std::size_t probe = start + n;
                        while (probe < data_.size() && is_ws(data_[probe])) ++probe;
                        if (data_.substr(probe, 9) == "endstream") len = n;
                    }
                    if (!len) {
                        std::size_t end = data_.find("endstream", start);
                        if (end == std::string_view::npos) end = data_.size();
                        std::size_t e = end;
                        if (e > start && data_[e - 1] == '\n') --e;
                        if (e > start && data_[e - 1] == '\r') --e;
                        len = e - start;
                    }
                    obj->kind = Object::Kind::Stream;
                    obj->stream_data = std::string(data_.substr(start, *len));
                    pos = start + *len;
                } else {
                    pos = after;
                }
            }
            objects_[*num] = std::move(*obj);
        }
        // Expand object streams for numbers not defined directly.
        std::vector<std::pair<int, Object>> extra;
        for (const auto& [num, obj] : objects_) {
            if (obj.kind != Object::Kind::Stream) continue;
            const Object* type = obj.get("Type");
            if (!type || !type->is_name("ObjStm")) continue;
            auto decoded = decode_stream(obj);
            if (!decoded) continue;
            const Object* n = obj.get("N");
            const Object* first = obj.get("First");
            if (!n || !first || n->kind != Object::Kind::Number || first->kind != Object::Kind::Number) continue;
            Lexer header(*decoded);
            std::vector<std::pair<int, std::size_t>> entries;
            for (int k = 0; k < static_cast<int>(n->number); ++k) {
                auto a = header.next();
                auto b = header.next();
                if (!a || !b || a->kind != Object::Kind::Number || b->kind != Object::Kind::Number) break;
                entries.emplace_back(static_cast<int>(a->number), static_cast<std::size_t>(b->number));
            }
            for (const auto& [onum, off] : entries) {
                std::size_t at = static_cast<std::size_t>(first->number) + off;
                if (at >= decoded->size()) continue;
                Lexer body(*decoded, at);
                auto o = body.next();
                if (o) extra.emplace_back(onum, std::move(*o));
            }
        }
        for (auto& [num, obj] : extra) {
            if (!objects_.count(num)) objects_.emplace(num, std::move(obj));
        }
    }

    std::string_view data_;
    std::map<int, Object> objects_;
};

void append_cp(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// PDF strings: UTF-16BE with BOM, otherwise treated as a single-byte encoding.
std::string decode_pdf_string(std::string_view raw) {
    std::string out;
    if (raw.size() >= 2 && static_cast<unsigned char>(raw[0]) == 0xFE && static_cast<unsigned char>(raw[1]) == 0xFF) {
        for (std::size_t i = 2; i + 1 < raw.size(); i += 2) {
            std::uint32_t cp = (static_cast<unsigned char>(raw[i]) << 8) | static_cast<unsigned char>(raw[i + 1]);
            if (cp >= 0xD800 && cp <= 0xDFFF) cp = 0xFFFD;
            append_cp(out, cp);
        }
        return out;
    }
    for (unsigned char c : raw) {
        if (c == '\r' || c == '\n' || c == '\t') {
            out.push_back(' ');
        } else if (c >= 0x20 && c < 0x7F) {
            out.push_back(static_cast<char>(c));
        } else if (c >= 0xA0) {
            append_cp(out, c);
        } else if (c == 0x92) {
            append_cp(out, 0x2019);
        } else if (c == 0x93 || c == 0x94) {
            append_cp(out, c == 0x93 ? 0x201C : 0x201D);
        } else if (c == 0x96 || c == 0x97) {
            append_cp(out, c == 0x96 ? 0x2013 : 0x2014);
        }
    }
    return out;
}

std::string content_text(std::string_view content) {
    std::string out;
    std::string line;
    auto newline = [&] {
        std::string t = text::collapse_whitespace(line);
        if (!t.empty()) {
            if (!out.empty()) out.push_back('\n');
            out += t;
        }
        line.clear();
    };
    Lexer lex(content);
    std::vector<Object> operands;
    while (true) {
        auto tok = lex.next();
        if (!tok) break;
        if (tok->kind != Object::Kind::Keyword) {
            operands.push_back(std::move(*tok));
            if (operands.size() > 64) operands.erase(operands.begin());
            continue;
        }
        const std::string& op = tok->str;
        if (op == "Tj" && !operands.empty() && operands.back().kind == Object::Kind::String) {
            line += decode_pdf_string(operands.back().str);
        } else if ((op == "'" || op == "\"") && !operands.empty() && operands.back().kind == Object::Kind::String) {
            newline();
            line += decode_pdf_string(operands.back().str);
        } else if (op == "TJ" && !operands.empty() && operands.back().kind == Object::Kind::Array) {
            for (const auto& item : *operands.back().array) {
                if (item.kind == Object::Kind::String) line += decode_pdf_string(item.str);
                else if (item.kind == Object::Kind::Number && item.number < -200) line.push_back(' ');
            }
        } else if (op == "T*" || op == "ET") {
            newline();
        } else if ((op == "Td" || op == "TD") && operands.size() >= 2) {
            const Object& ty = operands[operands.size() - 1];
            const Object& tx = operands[operands.size() - 2];
            if (ty.kind == Object::Kind::Number && std::fabs(ty.number) > 0.01) newline();
            else if (tx.kind == Object::Kind::Number && std::fabs(tx.number) > 0.01) line.push_back(' ');
        } else if (op == "Tm") {
            newline();
        } else if (op == "BI") {
            // inline image: skip to EI
            std::size_t p = lex.pos();
            std::size_t ei = content.find("EI", p);
            lex.seek(ei == std::string_view::npos ? content.size() : ei + 2);
        }
        operands.clear();
    }
    newline();
    return out;
}

}  // namespace

bool looks_like_pdf(std::string_view data) {
    return data.substr(0, 1024).find("%PDF-") != std::string_view::npos;
}

std::string inflate(std::string_view data) {
    std::string out;
    if (data.empty()) return out;
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) return out;
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    char buf[16384];
    int rc = Z_OK;
    while (rc == Z_OK) {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        rc = ::inflate(&zs, Z_NO_FLUSH);
        out.append(buf, sizeof(buf) - zs.avail_out);
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
    }
    inflateEnd(&zs);
    return out;
}

Document parse(std::string_view data) {
    if (!looks_like_pdf(data)) throw Error(ErrorCode::InvalidContent, "not a PDF document");
    Reader reader(data);

    std::vector<const Object*> pages;
    std::set<const Object*> visited;
    std::function<void(const Object*, int)> walk = [&](const Object* node, int depth) {
        node = reader.resolve(node);
        if (!node || depth > 64 || !node->dict || !visited.insert(node).second) return;
        const Object* type = node->get("Type");
        const Object* kids = reader.resolve(node->get("Kids"));
        if ((type && type->is_name("Pages")) || (kids && kids->kind == Object::Kind::Array)) {
            if (kids && kids->array) {
                for (const auto& k : *kids->array) walk(&k, depth + 1);
            }
        } else if (type && type->is_name("Page")) {
            pages.push_back(node);
        }
    };
    for (const auto& [num, obj] : reader.objects()) {
        const Object* type = obj.get("Type");
        if (type && type->is_name("Catalog")) {
            walk(obj.get("Pages"), 0);
            break;
        }
    }
    if (pages.empty()) {
        for (const auto& [num, obj] : reader.objects()) {
            const Object* type = obj.get("Type");
            if (type && type->is_name("Page")) pages.push_back(&obj);
        }
    }
    if (pages.empty()) throw Error(ErrorCode::InvalidContent, "PDF has no pages");

    Document doc;
    for (const Object* page : pages) {
        std::string page_text;
        const Object* contents = reader.resolve(page->get("Contents"));
        std::vector<const Object*> streams;
        if (contents && contents->kind == Object::Kind::Stream) streams.push_back(contents);
        if (contents && contents->kind == Object::Kind::Array) {
            for (const auto& c : *contents->array) {
                if (const Object* s = reader.resolve(&c); s && s->kind == Object::Kind::Stream) streams.push_back(s);
            }
        }
        std::string combined;
        for (const Object* s : streams) {
            if (auto decoded = reader.decode_stream(*s)) {
                combined += *decoded;
                combined.push_back('\n');
            }
        }
        doc.pages.push_back(content_text(combined));
    }
    for (const auto& [num, obj] : reader.objects()) {
        const Object* uri = obj.get("URI");
        if (!uri) {
            const Object* action = reader.resolve(obj.get("A"));
            if (action) uri = action->get("URI");
        }
        uri = reader.resolve(uri);
        if (uri && uri->kind == Object::Kind::String) {
            std::string u = decode_pdf_string(uri->str);
            if (std::find(doc.uris.begin(), doc.uris.end(), u) == doc.uris.end()) doc.uris.push_back(u);
        }
    }
    return doc;
}

std::string extract_text(std::string_view data) {
    Document doc = parse(data);
    std::string out;
    for (const auto& p : doc.pages) {
        if (p.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += p;
    }
    if (text::trim(out).empty()) throw Error(ErrorCode::InvalidContent, "PDF contains no extractable text");
    return out;
}

}  // namespace caesar::pdf
