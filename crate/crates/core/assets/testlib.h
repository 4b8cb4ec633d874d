/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Self-contained subset of the testlib generator/checker API, bundled so that
 * synthesized generators and checkers compile without network access.
 *
 * It is strictly recommended to include "testlib.h" before any other include
 * in your code. Use "shuffle", and "rnd.next()" instead of rand/srand/
 * random_shuffle; these calls produce stable results for any C++ compiler.
 *
 * Supported:
 *   generators: registerGen, rnd.next(...), rnd.wnext(...), rnd.any, rnd.perm,
 *               rnd.distinct, rnd.next("[a-z]{1,10}"), shuffle, opt<T>, has_opt,
 *               println, format, ensure/ensuref
 *   checkers:   registerTestlibCmd, inf/ouf/ans streams with readInt/readLong/
 *               readDouble/readToken/readWord/readLine/eof/seekEof, quitf
 *
 * Exit codes follow testlib: 0 ok, 1 wrong answer, 2 presentation error,
 * 3 checker failure.
 */
#ifndef TCFORGE_TESTLIB_H
#define TCFORGE_TESTLIB_H

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

enum TResult { _ok = 0, _wa = 1, _pe = 2, _fail = 3 };

#define TESTLIB_PRINTF_FMT(fmt_idx, arg_idx) __attribute__((format(printf, fmt_idx, arg_idx)))

inline std::string testlib_vformat(const char *fmt, va_list ap) {
    va_list copy;
    va_copy(copy, ap);
    int n = std::vsnprintf(nullptr, 0, fmt, copy);
    va_end(copy);
    if (n < 0) return std::string();
    std::string out(static_cast<size_t>(n) + 1, '\0');
    std::vsnprintf(&out[0], out.size(), fmt, ap);
    out.resize(static_cast<size_t>(n));
    return out;
}

inline std::string format(const char *fmt, ...) TESTLIB_PRINTF_FMT(1, 2);
inline std::string format(const char *fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    std::string s = testlib_vformat(fmt, ap);
    va_end(ap);
    return s;
}

inline void quit(TResult result, const std::string &msg) {
    static const char *names[] = {"ok", "wrong answer", "wrong output format", "FAIL"};
    std::fprintf(stderr, "%s %s\n", names[result], msg.c_str());
    std::fflush(stdout);
    std::exit(static_cast<int>(result));
}

inline void quitf(TResult result, const char *fmt, ...) TESTLIB_PRINTF_FMT(2, 3);
inline void quitf(TResult result, const char *fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    std::string s = testlib_vformat(fmt, ap);
    va_end(ap);
    quit(result, s);
}

inline void __testlib_fail(const std::string &msg) { quit(_fail, msg); }

#define ensure(cond) \
    ((cond) ? (void)0 : __testlib_fail(std::string("ensure failed: ") + #cond))

inline void ensuref(bool cond, const char *fmt, ...) TESTLIB_PRINTF_FMT(2, 3);
inline void ensuref(bool cond, const char *fmt, ...) {
    if (cond) return;
    va_list ap;
    va_start(ap, fmt);
    std::string s = testlib_vformat(fmt, ap);
    va_end(ap);
    __testlib_fail(s);
}

class random_t {
  public:
    random_t() : state(0x9E3779B97F4A7C15ULL) {}

    void setSeed(uint64_t seed) { state = seed ^ 0x9E3779B97F4A7C15ULL; }

    double next() { return (nextBits() >> 11) * (1.0 / 9007199254740992.0); }

    int next(int n) {
        if (n <= 0) __testlib_fail("random_t::next(int n): n must be positive");
        return static_cast<int>(bounded(static_cast<uint64_t>(n)));
    }
    unsigned int next(unsigned int n) {
        if (n == 0) __testlib_fail("random_t::next(unsigned n): n must be positive");
        return static_cast<unsigned int>(bounded(n));
    }
    long long next(long long n) {
        if (n <= 0) __testlib_fail("random_t::next(long long n): n must be positive");
        return static_cast<long long>(bounded(static_cast<uint64_t>(n)));
    }
    unsigned long long next(unsigned long long n) {
        if (n == 0) __testlib_fail("random_t::next(unsigned long long n): n must be positive");
        return bounded(n);
    }
    long next(long n) { return static_cast<long>(next(static_cast<long long>(n))); }
    unsigned long next(unsigned long n) {
        return static_cast<unsigned long>(next(static_cast<unsigned long long>(n)));
    }
    double next(double n) { return n * next(); }

    int next(int from, int to) {
        if (from > to) __testlib_fail("random_t::next(from, to): from > to");
        return static_cast<int>(from + static_cast<long long>(
                                           bounded(static_cast<uint64_t>(static_cast<long long>(to) - from + 1))));
    }
    unsigned int next(unsigned int from, unsigned int to) {
        if (from > to) __testlib_fail("random_t::next(from, to): from > to");
        return from + static_cast<unsigned int>(bounded(static_cast<uint64_t>(to - from) + 1));
    }
    long long next(long long from, long long to) {
        if (from > to) __testlib_fail("random_t::next(from, to): from > to");
        uint64_t span = static_cast<uint64_t>(to) - static_cast<uint64_t>(from);
        if (span == std::numeric_limits<uint64_t>::max()) return static_cast<long long>(nextBits());
        return static_cast<long long>(static_cast<uint64_t>(from) + bounded(span + 1));
    }
    unsigned long long next(unsigned long long from, unsigned long long to) {
        if (from > to) __testlib_fail("random_t::next(from, to): from > to");
        uint64_t span = to - from;
        if (span == std::numeric_limits<uint64_t>::max()) return nextBits();
        return from + bounded(span + 1);
    }
    long next(long from, long to) {
        return static_cast<long>(next(static_cast<long long>(from), static_cast<long long>(to)));
    }
    double next(double from, double to) {
        if (from > to) __testlib_fail("random_t::next(from, to): from > to");
        return from + (to - from) * next();
    }

    std::string next(const std::string &pattern) { return generatePattern(pattern); }
    std::string next(const char *pattern) { return generatePattern(std::string(pattern)); }

    template <typename T>
    T wnext(T n, int type) {
        if (type == 0) return next(n);
        T best = next(n);
        int reps = type > 0 ? type : -type;
        for (int i = 0; i < reps; i++) {
            T v = next(n);
            best = type > 0 ? std::max(best, v) : std::min(best, v);
        }
        return best;
    }

    template <typename T>
    T wnext(T from, T to, int type) {
        if (from > to) __testlib_fail("random_t::wnext(from, to, type): from > to");
        if (type == 0) return next(from, to);
        T best = next(from, to);
        int reps = type > 0 ? type : -type;
        for (int i = 0; i < reps; i++) {
            T v = next(from, to);
            best = type > 0 ? std::max(best, v) : std::min(best, v);
        }
        return best;
    }

    template <typename Container>
    typename Container::value_type any(const Container &c) {
        if (c.empty()) __testlib_fail("random_t::any(container): container is empty");
        auto it = c.begin();
        std::advance(it, next(static_cast<long long>(c.size())));
        return *it;
    }

    template <typename Iter>
    typename std::iterator_traits<Iter>::value_type any(const Iter &begin, const Iter &end) {
        long long size = std::distance(begin, end);
        if (size <= 0) __testlib_fail("random_t::any(begin, end): range is empty");
        Iter it = begin;
        std::advance(it, next(size));
        return *it;
    }

    template <typename T>
    std::vector<T> perm(T size, T first = 0) {
        std::vector<T> p(static_cast<size_t>(size));
        for (T i = 0; i < size; i++) p[static_cast<size_t>(i)] = first + i;
        for (size_t i = 1; i < p.size(); i++) std::swap(p[i], p[static_cast<size_t>(next(static_cast<long long>(i + 1)))]);
        return p;
    }

    template <typename T>
    std::vector<T> distinct(int size, T from, T to) {
        if (size < 0) __testlib_fail("random_t::distinct: size must be non-negative");
        if (static_cast<long double>(to) - static_cast<long double>(from) + 1 < size)
            __testlib_fail("random_t::distinct: not enough values");
        std::set<T> seen;
        std::vector<T> out;
        while (static_cast<int>(out.size()) < size) {
            T v = next(from, to);
            if (seen.insert(v).second) out.push_back(v);
        }
        return out;
    }

  private:
    uint64_t state;

    uint64_t nextBits() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t bounded(uint64_t n) {
        uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
        uint64_t v;
        do {
            v = nextBits();
        } while (v >= limit);
        return v % n;
    }

    static std::string parseClass(const std::string &p, size_t &i) {
        std::string chars;
        bool negate = false;
        if (i < p.size() && p[i] == '^') {
            negate = true;
            i++;
        }
        while (i < p.size() && p[i] != ']') {
            char c = p[i];
            if (c == '\\' && i + 1 < p.size()) c = p[++i];
            if (i + 2 < p.size() && p[i + 1] == '-' && p[i + 2] != ']') {
                char hi = p[i + 2];
                if (hi == '\\' && i + 3 < p.size()) {
                    hi = p[i + 3];
                    i++;
                }
                for (int x = static_cast<unsigned char>(c); x <= static_cast<unsigned char>(hi); x++)
                    chars.push_back(static_cast<char>(x));
                i += 3;
            } else {
                chars.push_back(c);
                i++;
            }
        }
        if (i >= p.size()) __testlib_fail("pattern: unterminated character class");
        i++;
        if (negate) {
            std::string all;
            for (int x = 32; x < 127; x++)
                if (chars.find(static_cast<char>(x)) == std::string::npos) all.push_back(static_cast<char>(x));
            return all;
        }
        return chars;
    }

    std::string generatePattern(const std::string &p) {
        std::string out;
        size_t i = 0;
        while (i < p.size()) {
            std::string choices;
            char c = p[i];
            if (c == '[') {
                i++;
                choices = parseClass(p, i);
            } else if (c == '\\' && i + 1 < p.size()) {
                choices = std::string(1, p[i + 1]);
                i += 2;
            } else {
                choices = std::string(1, c);
                i++;
            }
            long long lo = 1, hi = 1;
            if (i < p.size() && p[i] == '{') {
                size_t close = p.find('}', i);
                if (close == std::string::npos) __testlib_fail("pattern: unterminated repetition");
                std::string body = p.substr(i + 1, close - i - 1);
                size_t comma = body.find(',');
                lo = std::atoll(body.substr(0, comma).c_str());
                hi = comma == std::string::npos ? lo : std::atoll(body.substr(comma + 1).c_str());
                i = close + 1;
            }
            if (choices.empty() || lo > hi) __testlib_fail("pattern: invalid pattern " + p);
            long long count = next(lo, hi);
            for (long long k = 0; k < count; k++)
                out.push_back(choices[static_cast<size_t>(next(static_cast<long long>(choices.size())))]);
        }
        return out;
    }
};

static random_t rnd;

template <typename Iter>
void shuffle(Iter begin, Iter end) {
    long long n = std::distance(begin, end);
    for (long long i = 1; i < n; i++) std::iter_swap(begin + i, begin + rnd.next(i + 1));
}

static std::vector<std::string> __testlib_argv;
static std::map<std::string, std::string> __testlib_opts;

inline void __testlib_parse_opts() {
    __testlib_opts.clear();
    for (size_t i = 1; i < __testlib_argv.size(); i++) {
        const std::string &a = __testlib_argv[i];
        if (a.size() < 2 || a[0] != '-' || std::isdigit(static_cast<unsigned char>(a[1]))) continue;
        std::string key = a.substr(a[1] == '-' ? 2 : 1);
        size_t eq = key.find('=');
        if (eq != std::string::npos) {
            __testlib_opts[key.substr(0, eq)] = key.substr(eq + 1);
        } else if (i + 1 < __testlib_argv.size() &&
                   (__testlib_argv[i + 1].empty() || __testlib_argv[i + 1][0] != '-' ||
                    (__testlib_argv[i + 1].size() > 1 &&
                     std::isdigit(static_cast<unsigned char>(__testlib_argv[i + 1][1]))))) {
            __testlib_opts[key] = __testlib_argv[++i];
        } else {
            __testlib_opts[key] = "true";
        }
    }
}

inline void registerGen(int argc, char *argv[], int /*version*/ = 1) {
    __testlib_argv.assign(argv, argv + argc);
    uint64_t h = 14695981039346656037ULL;
    for (int i = 1; i < argc; i++) {
        for (const char *p = argv[i]; *p; p++) {
            h ^= static_cast<unsigned char>(*p);
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    }
    rnd.setSeed(h);
    __testlib_parse_opts();
}

inline bool has_opt(const std::string &key) { return __testlib_opts.count(key) > 0; }

template <typename T>
T __testlib_convert(const std::string &key, const std::string &s);

template <>
inline std::string __testlib_convert<std::string>(const std::string &, const std::string &s) { return s; }

template <>
inline bool __testlib_convert<bool>(const std::string &key, const std::string &s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    __testlib_fail("opt: argument " + key + " is not a boolean: " + s);
    return false;
}

#define TESTLIB_INTEGRAL_OPT(T)                                                                  \
    template <>                                                                                  \
    inline T __testlib_convert<T>(const std::string &key, const std::string &s) {                \
        char *end = nullptr;                                                                     \
        errno = 0;                                                                               \
        long long v = std::strtoll(s.c_str(), &end, 10);                                         \
        if (s.empty() || *end != '\0' || errno != 0 || v < static_cast<long long>(std::numeric_limits<T>::min()) || \
            (v > 0 && static_cast<unsigned long long>(v) > static_cast<unsigned long long>(std::numeric_limits<T>::max()))) \
            __testlib_fail("opt: argument " + key + " is not a valid integer: " + s);           \
        return static_cast<T>(v);                                                                \
    }
TESTLIB_INTEGRAL_OPT(int)
TESTLIB_INTEGRAL_OPT(long)
TESTLIB_INTEGRAL_OPT(long long)
TESTLIB_INTEGRAL_OPT(unsigned int)
#undef TESTLIB_INTEGRAL_OPT

template <>
inline double __testlib_convert<double>(const std::string &key, const std::string &s) {
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') __testlib_fail("opt: argument " + key + " is not a number: " + s);
    return v;
}

template <typename T = std::string>
T opt(const std::string &key) {
    auto it = __testlib_opts.find(key);
    if (it == __testlib_opts.end()) __testlib_fail("opt: unknown option " + key);
    return __testlib_convert<T>(key, it->second);
}

template <typename T>
T opt(const std::string &key, const T &default_value) {
    auto it = __testlib_opts.find(key);
    if (it == __testlib_opts.end()) return default_value;
    return __testlib_convert<T>(key, it->second);
}

inline std::string opt(const std::string &key, const char *default_value) {
    return opt<std::string>(key, std::string(default_value));
}

template <typename T = std::string>
T opt(int index) {
    if (index < 0 || static_cast<size_t>(index) >= __testlib_argv.size())
        __testlib_fail(format("opt: positional argument %d missing", index));
    return __testlib_convert<T>(format("#%d", index), __testlib_argv[static_cast<size_t>(index)]);
}

inline void println() { std::cout << '\n'; }

template <typename T>
void println(const T &x) {
    std::cout << x << '\n';
}

template <typename T, typename... Rest>
void println(const T &x, const Rest &...rest) {
    std::cout << x << ' ';
    println(rest...);
}

template <typename T>
void println(const std::vector<T> &v) {
    for (size_t i = 0; i < v.size(); i++) std::cout << (i ? " " : "") << v[i];
    std::cout << '\n';
}

class InStream {
  public:
    InStream() : pos(0), fail_verdict(_fail) {}

    void init(const std::string &path, TResult on_error) {
        std::ifstream f(path, std::ios::binary);
        if (!f) quit(_fail, "cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        data = ss.str();
        pos = 0;
        fail_verdict = on_error;
    }

    bool eof() { return pos >= data.size(); }

    bool seekEof() {
        skipBlanks();
        return eof();
    }

    bool eoln() { return !eof() && (data[pos] == '\n' || data[pos] == '\r'); }

    bool seekEoln() {
        while (!eof() && (data[pos] == ' ' || data[pos] == '\t')) pos++;
        return eof() || eoln();
    }

    void skipBlanks() {
        while (!eof() && std::isspace(static_cast<unsigned char>(data[pos]))) pos++;
    }

    std::string readToken() {
        skipBlanks();
        if (eof()) quit(fail_verdict, "unexpected end of file, token expected");
        size_t start = pos;
        while (!eof() && !std::isspace(static_cast<unsigned char>(data[pos]))) pos++;
        return data.substr(start, pos - start);
    }
    std::string readWord() { return readToken(); }
    std::string readToken(const std::string &, const std::string & = "") { return readToken(); }

    long long readLong() {
        std::string t = readToken();
        char *end = nullptr;
        errno = 0;
        long long v = std::strtoll(t.c_str(), &end, 10);
        if (t.empty() || *end != '\0' || errno != 0) quit(fail_verdict, "expected integer, found " + t);
        return v;
    }
    long long readLong(long long lo, long long hi, const std::string &name = "") {
        long long v = readLong();
        if (v < lo || v > hi) quit(fail_verdict, format("%s=%lld violates the range", name.c_str(), v));
        return v;
    }
    int readInt() {
        long long v = readLong();
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
            quit(fail_verdict, "integer out of int range");
        return static_cast<int>(v);
    }
    int readInt(int lo, int hi, const std::string &name = "") {
        return static_cast<int>(readLong(lo, hi, name));
    }
    std::vector<int> readInts(int n, int lo, int hi) {
        std::vector<int> v(static_cast<size_t>(n));
        for (auto &x : v) x = readInt(lo, hi);
        return v;
    }
    double readDouble() {
        std::string t = readToken();
        char *end = nullptr;
        double v = std::strtod(t.c_str(), &end);
        if (t.empty() || *end != '\0') quit(fail_verdict, "expected real number, found " + t);
        return v;
    }
    double readReal() { return readDouble(); }
    double readDouble(double lo, double hi, const std::string &name = "") {
        double v = readDouble();
        if (v < lo || v > hi) quit(fail_verdict, name + " violates the range");
        return v;
    }

    std::string readLine() {
        if (eof()) quit(fail_verdict, "unexpected end of file, line expected");
        size_t start = pos;
        while (!eof() && data[pos] != '\n') pos++;
        std::string line = data.substr(start, pos - start);
        if (!eof()) pos++;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
    std::string readString() { return readLine(); }

    char readChar() {
        if (eof()) quit(fail_verdict, "unexpected end of file, char expected");
        return data[pos++];
    }
    void readSpace() {
        if (readChar() != ' ') quit(fail_verdict, "space expected");
    }
    void readEoln() {
        if (!eof() && data[pos] == '\r') pos++;
        if (readChar() != '\n') quit(fail_verdict, "end of line expected");
    }
    void readEof() {
        if (!eof()) quit(fail_verdict, "end of file expected");
    }

    void quitf(TResult r, const char *fmt, ...) TESTLIB_PRINTF_FMT(3, 4) {
        va_list ap;
        va_start(ap, fmt);
        std::string s = testlib_vformat(fmt, ap);
        va_end(ap);
        quit(r, s);
    }

  private:
    std::string data;
    size_t pos;
    TResult fail_verdict;
};

static InStream inf, ouf, ans;

inline void registerTestlibCmd(int argc, char *argv[]) {
    __testlib_argv.assign(argv, argv + argc);
    if (argc < 4) quit(_fail, "usage: checker <input-file> <output-file> <answer-file>");
    inf.init(argv[1], _fail);
    ouf.init(argv[2], _pe);
    ans.init(argv[3], _fail);
}

inline bool doubleCompare(double expected, double result, double eps) {
    if (std::isnan(expected) || std::isnan(result)) return std::isnan(expected) && std::isnan(result);
    if (std::isinf(expected)) return expected == result;
    double diff = std::fabs(expected - result);
    return diff <= eps || diff <= eps * std::fabs(expected);
}

#endif
