/** Miniature bidirectional transformer encoder with two heads:
 * a masked-LM head over the vocabulary and a two-way classification head
 * reading the first-position ([CLS]) representation.
 *
 * Parameters are plain tf.Variables held in insertion order, which makes
 * warm starting, hashing and checkpointing explicit. Initialization is
 * fully determined by (baseModelId, dims): two models built from the same
 * pair are bit-identical, and that deterministic init is the "base
 * checkpoint" that zero epochs of LM fine-tuning must return untouched.
 */

import * as tf from "@tensorflow/tfjs";
import * as crypto from "crypto";

import { Rng, hashString } from "./rng";

export interface ModelDims {
    vocabSize: number;
    dModel: number;
    numLayers: number;
    numHeads: number;
    ffnDim: number;
    maxTokens: number;
}

type InitKind = "normal" | "zeros" | "ones";

interface ParamSpec {
    name: string;
    shape: number[];
    init: InitKind;
}

function paramSpecs(dims: ModelDims): ParamSpec[] {
    const d = dims.dModel;
    const specs: ParamSpec[] = [
        { name: "emb/token", shape: [dims.vocabSize, d], init: "normal" },
        { name: "emb/pos", shape: [dims.maxTokens, d], init: "normal" },
    ];
    for (let i = 0; i < dims.numLayers; i++) {
        const p = `layer${i}`;
        specs.push(
            { name: `${p}/ln1/gamma`, shape: [d], init: "ones" },
            { name: `${p}/ln1/beta`, shape: [d], init: "zeros" },
            { name: `${p}/attn/wq`, shape: [d, d], init: "normal" },
            { name: `${p}/attn/bq`, shape: [d], init: "zeros" },
            { name: `${p}/attn/wk`, shape: [d, d], init: "normal" },
            { name: `${p}/attn/bk`, shape: [d], init: "zeros" },
            { name: `${p}/attn/wv`, shape: [d, d], init: "normal" },
            { name: `${p}/attn/bv`, shape: [d], init: "zeros" },
            { name: `${p}/attn/wo`, shape: [d, d], init: "normal" },
            { name: `${p}/attn/bo`, shape: [d], init: "zeros" },
            { name: `${p}/ln2/gamma`, shape: [d], init: "ones" },
            { name: `${p}/ln2/beta`, shape: [d], init: "zeros" },
            { name: `${p}/ffn/w1`, shape: [d, dims.ffnDim], init: "normal" },
            { name: `${p}/ffn/b1`, shape: [dims.ffnDim], init: "zeros" },
            { name: `${p}/ffn/w2`, shape: [dims.ffnDim, d], init: "normal" },
            { name: `${p}/ffn/b2`, shape: [d], init: "zeros" },
        );
    }
    specs.push(
        { name: "final/ln/gamma", shape: [d], init: "ones" },
        { name: "final/ln/beta", shape: [d], init: "zeros" },
        { name: "mlm/w", shape: [d, dims.vocabSize], init: "normal" },
        { name: "mlm/b", shape: [dims.vocabSize], init: "zeros" },
        { name: "cls/w", shape: [d, 2], init: "normal" },
        { name: "cls/b", shape: [2], init: "zeros" },
    );
    return specs;
}

function initData(spec: ParamSpec, rng: Rng): Float32Array {
    const size = spec.shape.reduce((a, b) => a * b, 1);
    const data = new Float32Array(size);
    if (spec.init === "ones") {
        data.fill(1.0);
    } else if (spec.init === "normal") {
        for (let i = 0; i < size; i++) data[i] = rng.nextGaussian() * 0.02;
    }
    return data;
}

function gelu(x: tf.Tensor): tf.Tensor {
    const inner = x.add(x.pow(3).mul(0.044715)).mul(0.7978845608028654);
    return x.mul(inner.tanh().add(1.0)).mul(0.5);
}

export class MiniEncoder {
    readonly dims: ModelDims;
    readonly params: Map<string, tf.Variable>;

    constructor(dims: ModelDims, baseModelId: string) {
        this.dims = dims;
        this.params = new Map();
        const rng = new Rng(hashString(`${baseModelId}|${JSON.stringify(dims)}`));
        for (const spec of paramSpecs(dims)) {
            const tensor = tf.tensor(initData(spec, rng), spec.shape, "float32");
            this.params.set(spec.name, tf.variable(tensor, true));
            tensor.dispose();
        }
    }

    private p(name: string): tf.Variable {
        const v = this.params.get(name);
        if (v === undefined) throw new Error(`no parameter '${name}'`);
        return v;
    }

    variables(): tf.Variable[] {
        return [...this.params.values()];
    }

    private layerNorm(x: tf.Tensor, gamma: tf.Variable, beta: tf.Variable): tf.Tensor {
        const { mean, variance } = tf.moments(x, [-1], true);
        return x.sub(mean).div(variance.add(1e-5).sqrt()).mul(gamma).add(beta);
    }

    /** [B,T,din] x [din,dout] via a 2-D matMul; tfjs cannot backprop the
     * broadcasted 3-D form into a 2-D weight. */
    private project(x: tf.Tensor, w: tf.Variable, bias: tf.Variable): tf.Tensor {
        const [b, t] = x.shape as [number, number, number];
        const flat = x.reshape([b * t, w.shape[0]]);
        return flat.matMul(w).add(bias).reshape([b, t, w.shape[1] as number]);
    }

    private attention(h: tf.Tensor, attnBias: tf.Tensor, layer: number): tf.Tensor {
        const [b, t, d] = h.shape as [number, number, number];
        const heads = this.dims.numHeads;
        const dh = d / heads;
        const prefix = `layer${layer}/attn`;
        const split = (x: tf.Tensor) =>
            x.reshape([b, t, heads, dh]).transpose([0, 2, 1, 3]); // [B,H,T,dh]
        const q = split(this.project(h, this.p(`${prefix}/wq`), this.p(`${prefix}/bq`)));
        const k = split(this.project(h, this.p(`${prefix}/wk`), this.p(`${prefix}/bk`)));
        const v = split(this.project(h, this.p(`${prefix}/wv`), this.p(`${prefix}/bv`)));
        const scores = q.matMul(k, false, true).div(Math.sqrt(dh)).add(attnBias);
        const context = tf.softmax(scores).matMul(v); // [B,H,T,dh]
        const merged = context.transpose([0, 2, 1, 3]).reshape([b, t, d]);
        return this.project(merged, this.p(`${prefix}/wo`), this.p(`${prefix}/bo`));
    }

    /** Hidden states [B,T,d] for padded int ids [B,T] with pad mask [B,T]. */
    forward(ids: tf.Tensor, mask: tf.Tensor): tf.Tensor {
        const [, t] = ids.shape as [number, number];
        if (t > this.dims.maxTokens) {
            throw new Error(`sequence length ${t} exceeds max_tokens ${this.dims.maxTokens}`);
        }
        const tokenEmb = tf.gather(this.p("emb/token"), ids);
        const posEmb = this.p("emb/pos").slice([0, 0], [t, this.dims.dModel]);
        let x = tokenEmb.add(posEmb);
        // additive attention bias: 0 on real tokens, large negative on pads
        const attnBias = mask.reshape([-1, 1, 1, t]).sub(1.0).mul(1e9);
        for (let i = 0; i < this.dims.numLayers; i++) {
            const h = this.layerNorm(x, this.p(`layer${i}/ln1/gamma`), this.p(`layer${i}/ln1/beta`));
            x = x.add(this.attention(h, attnBias, i));
            const h2 = this.layerNorm(x, this.p(`layer${i}/ln2/gamma`), this.p(`layer${i}/ln2/beta`));
            const inner = gelu(this.project(h2, this.p(`layer${i}/ffn/w1`), this.p(`layer${i}/ffn/b1`)));
            x = x.add(this.project(inner, this.p(`layer${i}/ffn/w2`), this.p(`layer${i}/ffn/b2`)));
        }
        return this.layerNorm(x, this.p("final/ln/gamma"), this.p("final/ln/beta"));
    }

    /** Mean masked-LM cross-entropy over positions with label >= 0. */
    mlmLoss(ids: number[][], mask: number[][], labels: number[][]): tf.Scalar {
        const flatLabels: number[] = [];
        const flatPositions: number[] = [];
        const width = ids[0].length;
        labels.forEach((row, r) =>
            row.forEach((label, c) => {
                if (label >= 0) {
                    flatPositions.push(r * width + c);
                    flatLabels.push(label);
                }
            })
        );
        if (flatPositions.length === 0) {
            throw new Error("batch has no masked positions");
        }
        return tf.tidy(() => {
            const idsT = tf.tensor2d(ids, undefined, "int32");
            const maskT = tf.tensor2d(mask, undefined, "float32");
            const hidden = this.forward(idsT, maskT).reshape([-1, this.dims.dModel]);
            const picked = tf.gather(hidden, tf.tensor1d(flatPositions, "int32"));
            const logits = picked.matMul(this.p("mlm/w")).add(this.p("mlm/b"));
            const onehot = tf.oneHot(tf.tensor1d(flatLabels, "int32"), this.dims.vocabSize);
            return tf.losses.softmaxCrossEntropy(onehot, logits).asScalar();
        });
    }

    /** Two-way logits [B,2] from the first-position representation. */
    clsLogits(ids: tf.Tensor, mask: tf.Tensor): tf.Tensor {
        const hidden = this.forward(ids, mask);
        const first = hidden.slice([0, 0, 0], [-1, 1, -1]).squeeze([1]);
        return first.matMul(this.p("cls/w")).add(this.p("cls/b"));
    }

    clsLoss(ids: number[][], mask: number[][], labels: number[]): tf.Scalar {
        return tf.tidy(() => {
            const idsT = tf.tensor2d(ids, undefined, "int32");
            const maskT = tf.tensor2d(mask, undefined, "float32");
            const logits = this.clsLogits(idsT, maskT);
            const onehot = tf.oneHot(tf.tensor1d(labels, "int32"), 2);
            return tf.losses.softmaxCrossEntropy(onehot, logits).asScalar();
        });
    }

    /** P(relevant) per row; softmax over the two logits. */
    scoreBatch(ids: number[][], mask: number[][]): Float32Array {
        return tf.tidy(() => {
            const idsT = tf.tensor2d(ids, undefined, "int32");
            const maskT = tf.tensor2d(mask, undefined, "float32");
            const probs = tf.softmax(this.clsLogits(idsT, maskT));
            return probs.slice([0, 1], [-1, 1]).dataSync() as Float32Array;
        });
    }

    parameterHash(): string {
        const hash = crypto.createHash("sha256");
        for (const [name, variable] of this.params) {
            hash.update(name);
            const data = variable.dataSync() as Float32Array;
            hash.update(Buffer.from(data.buffer, data.byteOffset, data.byteLength));
        }
        return hash.digest("hex");
    }

    exportWeights(): Record<string, { shape: number[]; data: string }> {
        const out: Record<string, { shape: number[]; data: string }> = {};
        for (const [name, variable] of this.params) {
            const data = variable.dataSync() as Float32Array;
            out[name] = {
                shape: variable.shape.slice(),
                data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString("base64"),
            };
        }
        return out;
    }

    importWeights(weights: Record<string, { shape: number[]; data: string }>): void {
        for (const [name, variable] of this.params) {
            const entry = weights[name];
            if (entry === undefined) {
                throw new Error(`checkpoint missing parameter '${name}'`);
            }
            const raw = Buffer.from(entry.data, "base64");
            const data = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
            const tensor = tf.tensor(data, entry.shape, "float32");
            variable.assign(tensor);
            tensor.dispose();
        }
    }

    dispose(): void {
        for (const variable of this.params.values()) variable.dispose();
        this.params.clear();
    }
}
