//! Recomputes the 21 features of a small fixture along an independent path:
//! probability-space decoding, a separately written table perturbation,
//! post-editing loop, Meteor and two-pass statistics. Only the seed
//! derivation and the generator are shared with the library.

use qe_core::features::{extract_features, FeatureConfig, FEATURE_NAMES};
use qe_core::glassbox::{train_toy_model, ToyModelDoc};
use qe_core::noise::UnigramMlm;
use qe_core::seed::{derive, fnv1a64, Purpose};
use qe_core::{Label, LangPair, QeSample, TokenSeq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

struct Oracle<'a> {
    doc: &'a ToyModelDoc,
    mlm_vocab: Vec<String>,
    mlm_probs: Vec<f64>,
}

impl Oracle<'_> {
    fn src_row(&self, tok: &str) -> usize {
        self.doc.src_vocab.iter().position(|v| v == tok)
            .unwrap_or_else(|| self.doc.src_vocab.iter().position(|v| v == "<unk>").unwrap())
    }

    fn tgt_id(&self, tok: &str) -> usize {
        self.doc.tgt_vocab.iter().position(|v| v == tok)
            .unwrap_or_else(|| self.doc.tgt_vocab.iter().position(|v| v == "<unk>").unwrap())
    }

    fn dist(&self, table: &[Vec<f64>], x: usize, prev: usize) -> Vec<f64> {
        let l = self.doc.lambda;
        let raw: Vec<f64> = table[x]
            .iter()
            .zip(&self.doc.bigram_table[prev])
            .map(|(t, b)| t.powf(l) * b.powf(1.0 - l))
            .collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|r| r / z).collect()
    }

    fn logp(&self, p: f64) -> f64 {
        p.max(self.doc.floor).ln().min(0.0)
    }

    fn greedy(&self, table: &[Vec<f64>], src: &[String]) -> (Vec<String>, Vec<f64>) {
        let (mut out, mut lps, mut prev) = (vec![], vec![], 0);
        for s in src {
            let d = self.dist(table, self.src_row(s), prev);
            let mut best = 0;
            for v in 0..d.len() {
                let better = d[v] > d[best] * (1.0 + 1e-12)
                    || ((d[v] - d[best]).abs() <= 1e-12 * d[best] && self.doc.tgt_vocab[v] < self.doc.tgt_vocab[best]);
                if better {
                    best = v;
                }
            }
            out.push(self.doc.tgt_vocab[best].clone());
            lps.push(self.logp(d[best]));
            prev = best + 1;
        }
        (out, lps)
    }

    fn forced(&self, table: &[Vec<f64>], src: &[String], mt: &[String]) -> Vec<f64> {
        let mut prev = 0;
        mt.iter()
            .enumerate()
            .map(|(t, y)| {
                let x = self.src_row(&src[t.min(src.len() - 1)]);
                let d = self.dist(table, x, prev);
                let yi = self.tgt_id(y);
                prev = yi + 1;
                self.logp(d[yi])
            })
            .collect()
    }

    fn perturb(&self, rate: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = self.doc.trans_table.clone();
        for row in table.iter_mut() {
            let mut hit = false;
            for p in row.iter_mut() {
                let u: f64 = rng.random();
                if u < rate {
                    *p = self.doc.floor;
                    hit = true;
                }
            }
            if hit {
                let s: f64 = row.iter().sum();
                for p in row.iter_mut() {
                    *p /= s;
                }
            }
        }
        table
    }

    fn noised(&self, x: &[String], cfg: &FeatureConfig, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = x.to_vec();
        for _ in 0..cfg.noise_rounds {
            let mut kept = vec![];
            for t in &cur {
                let u: f64 = rng.random();
                if u >= cfg.p_delete {
                    kept.push(t.clone());
                }
            }
            let mut next = vec![];
            for t in kept {
                let u: f64 = rng.random();
                if u < cfg.p_insert {
                    next.push("<mask>".to_string());
                }
                next.push(t);
            }
            let u: f64 = rng.random();
            if u < cfg.p_insert {
                next.push("<mask>".to_string());
            }
            cur = next;
        }
        if cur.is_empty() {
            cur.push("<mask>".into());
        }
        let mut fill = ChaCha8Rng::seed_from_u64(derive(seed, 0, Purpose::MaskFill));
        cur.into_iter()
            .map(|t| {
                if t != "<mask>" {
                    return t;
                }
                let u: f64 = fill.random();
                let total: f64 = self.mlm_probs.iter().sum();
                let mut acc = 0.0;
                for (w, p) in self.mlm_vocab.iter().zip(&self.mlm_probs) {
                    acc += p;
                    if acc > u * total {
                        return w.clone();
                    }
                }
                self.mlm_vocab.last().unwrap().clone()
            })
            .collect()
    }
}

/// Meteor written from the definition: alignment pairs, then chunks counted
/// over pairs sorted by hypothesis position.
fn meteor(r: &[String], h: &[String]) -> f64 {
    if r.is_empty() && h.is_empty() {
        return 1.0;
    }
    if r.is_empty() || h.is_empty() {
        return 0.0;
    }
    let mut taken = vec![false; r.len()];
    let mut pairs = vec![];
    for (i, w) in h.iter().enumerate() {
        if let Some(j) = (0..r.len()).find(|&j| !taken[j] && &r[j] == w) {
            taken[j] = true;
            pairs.push((i, j));
        }
    }
    let m = pairs.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut chunks = 1.0;
    for w in pairs.windows(2) {
        if !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1) {
            chunks += 1.0;
        }
    }
    let (p, rc) = (m / h.len() as f64, m / r.len() as f64);
    let f = 10.0 * p * rc / (rc + 9.0 * p);
    f * (1.0 - 0.5 * (chunks / m).powi(3))
}

fn two_pass(v: &[f64]) -> [f64; 3] {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    [mean, std, if std < 1e-9 { 0.0 } else { mean / std }]
}

fn group(mt: &[String], outs: &[Vec<String>], psteps: &[f64]) -> Vec<f64> {
    let n = outs.len() as f64;
    let sims: Vec<f64> = outs.iter().map(|o| meteor(mt, o)).collect();
    let inner: Vec<f64> = outs
        .iter()
        .map(|a| outs.iter().map(|b| meteor(a, b)).sum::<f64>() / n)
        .collect();
    [two_pass(&sims), two_pass(&inner), two_pass(psteps)].concat()
}

fn oracle_features(o: &Oracle, id: &str, src: &str, mt: &str, cfg: &FeatureConfig) -> Vec<f64> {
    let (src, mt) = (toks(src), toks(mt));
    let dp = two_pass(&o.forced(&o.doc.trans_table, &src, &mt));
    let seed = derive(cfg.base_seed, fnv1a64(id), Purpose::Sample);

    let mut mc_out = vec![];
    let mut mc_p = vec![];
    for i in 0..cfg.n_mc as u64 {
        let table = o.perturb(cfg.dropout_rate, derive(seed, i, Purpose::McDropout));
        let (y, lp) = o.greedy(&table, &src);
        mc_p.push(lp.iter().sum::<f64>() / lp.len() as f64);
        mc_out.push(y);
    }
    let mut nz_out = vec![];
    let mut nz_p = vec![];
    for i in 0..cfg.n_noise as u64 {
        let x = o.noised(&src, cfg, derive(seed, i, Purpose::Noise));
        let (y, _) = o.greedy(&o.doc.trans_table, &x);
        let lp = o.forced(&o.doc.trans_table, &x, &y);
        nz_p.push(lp.iter().sum::<f64>() / lp.len() as f64);
        nz_out.push(y);
    }
    [dp.to_vec(), group(&mt, &mc_out, &mc_p), group(&mt, &nz_out, &nz_p)].concat()
}

#[test]
fn twenty_one_features_match_independent_oracle() {
    let corpus: Vec<(TokenSeq, TokenSeq)> = [
        ("the cat sees the dog", "die katze sieht den hund"),
        ("the dog sees a cat", "der hund sieht eine katze"),
        ("a small cat sleeps", "eine kleine katze schlaeft"),
        ("the man eats bread", "der mann isst brot"),
        ("a woman has a dog", "eine frau hat einen hund"),
        ("the child eats an apple", "das kind isst einen apfel"),
    ]
    .iter()
    .map(|(s, t)| (TokenSeq::from_text(s), TokenSeq::from_text(t)))
    .collect();
    let model = train_toy_model(&corpus, 0.3, 0.6).unwrap();
    let mlm = UnigramMlm::from_corpus(corpus.iter().map(|p| &p.0)).unwrap();
    let oracle = Oracle {
        doc: model.doc(),
        mlm_vocab: mlm.vocab().to_vec(),
        mlm_probs: mlm.probs().to_vec(),
    };
    let cfg = FeatureConfig {
        n_mc: 5,
        dropout_rate: 0.35,
        n_noise: 4,
        noise_rounds: 2,
        p_insert: 0.3,
        p_delete: 0.3,
        base_seed: 77,
    };
    let fixture = [
        ("f1", "the cat sees a dog", "die katze sieht eine hund"),
        ("f2", "a man eats the apple today", "ein mann isst apfel"),
    ];
    for (id, src, mt) in fixture {
        let sample = QeSample {
            id: id.into(),
            lang_pair: "en-de".parse::<LangPair>().unwrap(),
            src: TokenSeq::from_text(src),
            mt: TokenSeq::from_text(mt),
            label: Label::Da(0.0),
        };
        let got = extract_features(&sample, &model, &mlm, &cfg).unwrap();
        let want = oracle_features(&oracle, id, src, mt, &cfg);
        for (i, (g, w)) in got.values().iter().zip(&want).enumerate() {
            assert!(
                (g - w).abs() <= 1e-9 * w.abs().max(1.0),
                "{id} {}: library {g} vs oracle {w}",
                FEATURE_NAMES[i]
            );
        }
        // The fixture must exercise non-degenerate sampling.
        assert!(got.get("mc_sim_std").unwrap() > 0.0 || got.get("noise_sim_std").unwrap() > 0.0);
    }
}
