#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "wsdlog/analysis.hpp"
#include "wsdlog/chase.hpp"
#include "wsdlog/errors.hpp"
#include "wsdlog/homomorphism.hpp"
#include "wsdlog/model.hpp"
#include "wsdlog/parser.hpp"
#include "wsdlog/printer.hpp"
#include "wsdlog/rewrite.hpp"
#include "wsdlog/transform.hpp"

namespace {

using nlohmann::ordered_json;

// Exit codes: 0 ok, 2 parse, 3 semantic, 4 class precondition, 5 cap,
// 6 i/o, 7 internal invariant breach.
enum ExitCode {
    kOk = 0,
    kParse = 2,
    kSemantic = 3,
    kPrecondition = 4,
    kCap = 5,
    kIo = 6,
    kInternal = 7,
};

struct Options {
    std::string program_path;
    std::optional<std::string> query_path;
    std::optional<std::string> ucq_path;
    std::vector<std::string> csv_bindings;  // pred=path
    std::optional<std::size_t> resumptions;
    std::string mode = "groundws";
    std::optional<std::size_t> depth;
    std::string format;
    std::optional<std::string> out_path;
    std::optional<std::string> query_out_path;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw wsdlog::IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const Options& opt, const std::string& text) {
    if (!opt.out_path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*opt.out_path, std::ios::binary);
    if (!out) throw wsdlog::IoError("cannot write " + *opt.out_path);
    out << text;
}

std::size_t csv_probe_arity(const std::string& path) {
    std::string text = read_file(path);
    std::size_t fields = 1;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') ++i;
                else quoted = false;
            }
            continue;
        }
        if (c == '"') { quoted = true; any = true; continue; }
        if (c == ',') { ++fields; any = true; continue; }
        if (c == '\n' || c == '\r') {
            if (any) break;
            fields = 1;
            continue;
        }
        any = true;
    }
    if (!any) throw wsdlog::SemanticError("cannot infer arity from empty CSV " + path);
    return fields;
}

wsdlog::Program load_program(const Options& opt) {
    wsdlog::Program program = wsdlog::parse_program(read_file(opt.program_path));
    wsdlog::Schema schema = wsdlog::schema_of(program);

    for (const std::string& binding_spec : opt.csv_bindings) {
        auto eq = binding_spec.find('=');
        if (eq == std::string::npos)
            throw wsdlog::SemanticError("--csv expects pred=path, got '" + binding_spec + "'");
        wsdlog::CsvBinding binding;
        binding.predicate = binding_spec.substr(0, eq);
        binding.path = binding_spec.substr(eq + 1);
        auto it = schema.find(binding.predicate);
        binding.arity = it != schema.end() ? it->second : csv_probe_arity(binding.path);
        for (wsdlog::Atom atom : wsdlog::load_csv(binding)) {
            wsdlog::schema_add(schema, atom);
            program.database.insert(std::move(atom));
        }
    }
    return program;
}

wsdlog::ConjunctiveQuery load_query(const Options& opt, const wsdlog::Program& program) {
    if (!opt.query_path) throw wsdlog::SemanticError("this command requires --query");
    wsdlog::Schema schema = wsdlog::schema_of(program);
    return wsdlog::parse_query(read_file(*opt.query_path), &schema);
}

std::string position_name(const wsdlog::Position& p) { return wsdlog::to_string(p); }

int cmd_classify(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    wsdlog::Schema db_schema;
    for (const wsdlog::Atom& a : program.database) wsdlog::schema_add(db_schema, a);

    const wsdlog::ClassReport report = wsdlog::classify(program.rules, db_schema);
    const wsdlog::Marking marking = wsdlog::mark_variables(program.rules);
    const wsdlog::RankMap ranks =
        wsdlog::compute_ranks(wsdlog::build_dependency_graph(program.rules, db_schema));

    ordered_json j;
    j["sticky"] = report.sticky;
    j["weakly_acyclic"] = report.weakly_acyclic;
    j["weakly_sticky"] = report.weakly_sticky;
    j["zero_infinity"] = report.zero_infinity;
    j["pi_f"] = ordered_json::array();
    for (const wsdlog::Position& p : ranks.pi_f()) j["pi_f"].push_back(position_name(p));
    j["pi_inf"] = ordered_json::array();
    for (const wsdlog::Position& p : ranks.pi_inf()) j["pi_inf"].push_back(position_name(p));
    j["marked"] = ordered_json::array();
    for (const auto& [rule, var] : marking.marked)
        j["marked"].push_back(ordered_json{{"rule", rule}, {"variable", var}});

    write_output(opt, j.dump(2) + "\n");
    return kOk;
}

int cmd_ground(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    wsdlog::GroundingConfig cfg;
    if (opt.resumptions) {
        cfg.resumptions = *opt.resumptions;
    } else if (opt.query_path) {
        cfg.resumptions = wsdlog::resumptions_for(load_query(opt, program));
    }
    wsdlog::GroundProgram gp = wsdlog::ground_ws(program, cfg);
    write_output(opt, wsdlog::serialize_program(gp.as_program()));
    return kOk;
}

std::string format_answers(const std::set<std::vector<wsdlog::Term>>& answers,
                           const std::string& format) {
    if (format == "tsv") {
        std::string out;
        for (const auto& tuple : answers) {
            for (std::size_t i = 0; i < tuple.size(); ++i) {
                if (i) out.push_back('\t');
                out += tuple[i].name();
            }
            out.push_back('\n');
        }
        return out;
    }
    ordered_json j;
    j["answers"] = ordered_json::array();
    for (const auto& tuple : answers) {
        ordered_json row = ordered_json::array();
        for (const wsdlog::Term& t : tuple) row.push_back(t.name());
        j["answers"].push_back(row);
    }
    return j.dump(2) + "\n";
}

int cmd_answer(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    wsdlog::ConjunctiveQuery query = load_query(opt, program);

    std::set<std::vector<wsdlog::Term>> answers;
    if (opt.mode == "groundws") {
        wsdlog::GroundingConfig cfg;
        cfg.resumptions =
            opt.resumptions ? *opt.resumptions : wsdlog::resumptions_for(query);
        answers = wsdlog::answer_over_ground(query, wsdlog::ground_ws(program, cfg));
    } else if (opt.mode == "hybrid") {
        answers = wsdlog::hybrid_answer(program, query);
    } else if (opt.mode == "oracle") {
        if (!opt.depth) throw wsdlog::SemanticError("--mode oracle requires --depth");
        answers = wsdlog::certain_answers_oracle(query, program, *opt.depth);
    } else {
        throw wsdlog::SemanticError("unknown mode '" + opt.mode + "'");
    }

    write_output(opt, format_answers(answers, opt.format.empty() ? "json" : opt.format));
    return kOk;
}

int cmd_reduce_rank(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    std::optional<wsdlog::ConjunctiveQuery> query;
    if (opt.query_path) query = load_query(opt, program);

    wsdlog::ReduceRankResult result = wsdlog::reduce_rank(program, query);
    write_output(opt, wsdlog::serialize_program(result.program));
    if (opt.query_out_path && result.query) {
        std::ofstream out(*opt.query_out_path, std::ios::binary);
        if (!out) throw wsdlog::IoError("cannot write " + *opt.query_out_path);
        out << wsdlog::to_string(*result.query) << "\n";
    }
    return kOk;
}

int cmd_partial_ground(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    write_output(opt, wsdlog::serialize_program(wsdlog::partial_grounding(program)));
    return kOk;
}

int cmd_rewrite(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    wsdlog::ConjunctiveQuery query = load_query(opt, program);
    wsdlog::UCQRewriting ucq = wsdlog::rewrite_sticky(query, program.rules);
    write_output(opt, wsdlog::serialize_queries(ucq.disjuncts));
    return kOk;
}

int cmd_emit_sql(const Options& opt) {
    wsdlog::Program program = load_program(opt);
    wsdlog::UCQRewriting ucq;
    if (opt.ucq_path) {
        wsdlog::Schema schema = wsdlog::schema_of(program);
        std::vector<wsdlog::ConjunctiveQuery> queries =
            wsdlog::parse_queries(read_file(*opt.ucq_path), &schema);
        if (queries.empty()) throw wsdlog::SemanticError("empty UCQ file");
        ucq.head_predicate = queries.front().head_predicate;
        ucq.arity = queries.front().answer_terms.size();
        ucq.disjuncts = std::move(queries);
    } else {
        ucq = wsdlog::rewrite_sticky(load_query(opt, program), program.rules);
    }

    wsdlog::Schema schema = wsdlog::schema_of(program);
    for (const wsdlog::ConjunctiveQuery& cq : ucq.disjuncts)
        for (const wsdlog::Atom& a : cq.body) wsdlog::schema_add(schema, a);
    write_output(opt, wsdlog::emit_sql(ucq, wsdlog::default_sql_schema(schema)) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic query answering for weakly-sticky existential rule programs"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* cmd, bool with_query = true) {
        cmd->add_option("program", opt.program_path, "program file (.dl)")->required();
        cmd->add_option("--csv", opt.csv_bindings, "fact source, pred=path (repeatable)");
        cmd->add_option("--out", opt.out_path, "output path (default: stdout)");
        if (with_query) cmd->add_option("--query", opt.query_path, "query file (.dl)");
    };

    CLI::App* classify = app.add_subcommand("classify", "report syntactic classes and ranks");
    add_common(classify, false);

    CLI::App* ground = app.add_subcommand("ground", "run the grounding and print it");
    add_common(ground);
    ground->add_option("--resumptions", opt.resumptions, "resumption count (default: from query)");

    CLI::App* answer = app.add_subcommand("answer", "answer a query");
    add_common(answer);
    answer->add_option("--mode", opt.mode, "groundws | hybrid | oracle")
        ->check(CLI::IsMember({"groundws", "hybrid", "oracle"}));
    answer->add_option("--resumptions", opt.resumptions, "override resumption count");
    answer->add_option("--depth", opt.depth, "chase depth bound (oracle mode)");
    answer->add_option("--format", opt.format, "json | tsv")
        ->check(CLI::IsMember({"json", "tsv"}));

    CLI::App* reduce = app.add_subcommand("reduce-rank", "remove finite-rank existentials");
    add_common(reduce);
    reduce->add_option("--query-out", opt.query_out_path, "write the transformed query here");

    CLI::App* partial = app.add_subcommand("partial-ground", "ground the weak variables");
    add_common(partial, false);

    CLI::App* rewrite = app.add_subcommand("rewrite", "rewrite a query into a UCQ");
    add_common(rewrite);

    CLI::App* sql = app.add_subcommand("emit-sql", "emit the rewriting as SQL");
    add_common(sql);
    sql->add_option("--ucq", opt.ucq_path, "pre-rewritten UCQ file instead of --query");

    CLI11_PARSE(app, argc, argv);

    try {
        if (classify->parsed()) return cmd_classify(opt);
        if (ground->parsed()) return cmd_ground(opt);
        if (answer->parsed()) return cmd_answer(opt);
        if (reduce->parsed()) return cmd_reduce_rank(opt);
        if (partial->parsed()) return cmd_partial_ground(opt);
        if (rewrite->parsed()) return cmd_rewrite(opt);
        if (sql->parsed()) return cmd_emit_sql(opt);
    } catch (const wsdlog::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kParse;
    } catch (const wsdlog::SemanticError& e) {
        std::cerr << e.what() << "\n";
        return kSemantic;
    } catch (const wsdlog::PreconditionViolated& e) {
        std::cerr << e.what() << "\n";
        return kPrecondition;
    } catch (const wsdlog::CapExceeded& e) {
        std::cerr << e.what() << "\n";
        return kCap;
    } catch (const wsdlog::IoError& e) {
        std::cerr << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}
