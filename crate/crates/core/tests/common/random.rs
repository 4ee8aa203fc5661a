//! Random small service networks written as catalog/expression/options
//! text, so generated cases go through the same front end as fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctxsvc::composition::parse_composition_expr;
use ctxsvc::model::parse_catalog;
use ctxsvc::pipeline::{transform, RunOptions, Transformed};

use super::Fixture;

/// The three source texts of one generated case.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub catalog: String,
    pub expr: String,
    pub options: String,
}

const INTS: [&str; 3] = ["n0", "n1", "n2"];
const FLAGS: [&str; 3] = ["f0", "f1", "f2"];

fn service(rng: &mut ChaCha8Rng, i: usize) -> String {
    let mut params = vec!["Fee: int input;".to_string()];
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut pre = Vec::new();
    let mut post = Vec::new();

    let n = *INTS.choose(rng).unwrap();
    params.push(format!("{n}: int input where {n} >= {};", rng.gen_range(0..3)));
    inputs.push(n.to_string());
    if rng.gen_bool(0.6) {
        let f = FLAGS[rng.gen_range(0..2)];
        params.push(format!("{f}: bool input;"));
        pre.push(format!("{f} == {};", rng.gen_bool(0.7)));
    }
    if rng.gen_bool(0.7) {
        let f = if rng.gen_bool(0.5) { FLAGS[2] } else { FLAGS[1 - i % 2] };
        if !params.iter().any(|p| p.starts_with(&format!("{f}:"))) {
            params.push(format!("{f}: bool output;"));
            post.push(format!("{f} == true;"));
        }
    }
    let out = format!("r{i}");
    params.push(format!("{out}: int output;"));
    outputs.push(out);

    let mut ctx = String::new();
    match rng.gen_range(0..3) {
        0 => {}
        1 => {
            ctx = format!(
                "context {{ dimensions {{ level: int; }} rules {{ ctx.level >= {}; }} info {{}} }}",
                rng.gen_range(0..4)
            )
        }
        _ => {
            let tier = ["gold", "silver", "basic"].choose(rng).unwrap();
            ctx = format!(
                "context {{ dimensions {{ tier: enum Tier {{ gold, silver, basic }}; }} \
                 rules {{ ctx.tier == {tier}; }} info {{}} }}"
            )
        }
    }

    let mut legal = Vec::new();
    if rng.gen_bool(0.4) {
        legal.push(format!("{n} <= {};", rng.gen_range(1..6)));
    }
    if rng.gen_bool(0.5) {
        legal.push(format!("Fee := Fee + {};", rng.gen_range(1..50)));
    }

    let mut nf = Vec::new();
    if rng.gen_bool(0.8) {
        nf.push(format!("safety_time = {};", rng.gen_range(1..5)));
    }
    if rng.gen_bool(0.5) {
        nf.push(format!(
            "price {{ amount = {}; currency = dollar; unit = oneTime; }}",
            rng.gen_range(1..100)
        ));
    }

    format!(
        "service S{i} {{\n  parameters {{ {} }}\n  {ctx}\n  contract {{\n    function {{ name = \"Do{i}\"; \
         inputs = [{}]; address = \"s{i}\"; result_name = \"Res{i}\"; outputs = [{}]; pre {{ {} }} post {{ {} }} }}\n    \
         nonfunctional {{ {} }}\n    legal {{ {} }}\n  }}\n}}\n",
        params.join(" "),
        inputs.join(", "),
        outputs.join(", "),
        pre.join(" "),
        post.join(" "),
        nf.join(" "),
        legal.join(" "),
    )
}

/// Generates the case for `seed`. Not every case is well formed; see
/// [`Case::build`].
pub fn generate(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = rng.gen_bool(0.8);
    let mut catalog = service(&mut rng, 0);
    if two {
        catalog += &service(&mut rng, 1);
    }
    let expr = if two {
        match rng.gen_range(0..4) {
            0 => "S0 >> S1",
            1 => "S0 || S1",
            2 => "if (g) S0 else S1",
            _ => "S0 >> while (g) S1",
        }
    } else if rng.gen_bool(0.5) {
        "S0"
    } else {
        "while (g) S0"
    }
    .to_string();

    let mut options = format!("unroll_bound = {}\n\n[bindings]\n", rng.gen_range(1..3));
    options += &format!("Fee = {}\ng = {}\n", rng.gen_range(0..10), rng.gen_bool(0.5));
    for n in INTS {
        options += &format!("{n} = {}\n", rng.gen_range(0..6));
    }
    for f in FLAGS {
        options += &format!("{f} = {}\n", rng.gen_bool(0.6));
    }
    options += &format!(
        "\n[requester]\nlevel = {}\ntier = \"{}\"\n",
        rng.gen_range(0..4),
        ["gold", "silver", "basic"].choose(&mut rng).unwrap()
    );
    Case {
        seed,
        catalog,
        expr,
        options,
    }
}

impl Case {
    /// Runs the front end and the generator; `None` when the case is
    /// rejected somewhere along the way.
    pub fn build(&self) -> Option<(Fixture, Transformed)> {
        let catalog = parse_catalog(&self.catalog).ok()?;
        let expr = parse_composition_expr(&self.expr, &catalog).ok()?;
        let opts = RunOptions::from_toml(&self.options).ok()?.typed_for(&catalog).ok()?;
        let t = transform(&expr, &catalog, &opts).ok()?;
        Some((Fixture { catalog, expr, opts }, t))
    }
}

/// The first `n` seeds whose cases build, with their artifacts.
pub fn cases(n: usize) -> Vec<(Case, Fixture, Transformed)> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < n {
        let case = generate(seed);
        if let Some((f, t)) = case.build() {
            out.push((case, f, t));
        }
        seed += 1;
        assert!(seed < 20 * n as u64 + 100, "too many generated cases are rejected");
    }
    out
}
