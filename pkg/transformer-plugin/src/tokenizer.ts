/** Word-level tokenizer with the four special ids the model relies on.
 *
 * A desk-scale stand-in for subword tokenization: lowercased word tokens,
 * frequency-capped vocabulary, unknowns mapped to [UNK]. Every encoded
 * sequence starts with [CLS] (position 0 feeds the classification head)
 * and truncation keeps leading tokens only.
 */

export const PAD = 0;
export const UNK = 1;
export const CLS = 2;
export const MASK = 3;
export const N_SPECIAL = 4;

export interface Tokenizer {
    termToId: Map<string, number>;
    vocabSize: number;
}

function words(text: string): string[] {
    return text.toLowerCase().split(/\s+/).filter((w) => w.length > 0);
}

export function buildTokenizer(texts: string[], vocabSize: number): Tokenizer {
    const counts = new Map<string, number>();
    for (const text of texts) {
        for (const w of words(text)) {
            counts.set(w, (counts.get(w) ?? 0) + 1);
        }
    }
    const ranked = [...counts.entries()].sort(
        (a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1)
    );
    const kept = ranked.slice(0, Math.max(0, vocabSize - N_SPECIAL));
    const termToId = new Map<string, number>();
    kept.forEach(([term], i) => termToId.set(term, N_SPECIAL + i));
    return { termToId, vocabSize: N_SPECIAL + kept.length };
}

export function encode(tokenizer: Tokenizer, text: string, maxTokens: number): number[] {
    const ids = [CLS];
    for (const w of words(text)) {
        if (ids.length >= maxTokens) break;
        ids.push(tokenizer.termToId.get(w) ?? UNK);
    }
    return ids;
}

/** Right-pad a batch of sequences to a common length. */
export function padBatch(sequences: number[][]): { ids: number[][]; mask: number[][] } {
    const width = Math.max(...sequences.map((s) => s.length));
    const ids = sequences.map((s) => s.concat(Array(width - s.length).fill(PAD)));
    const mask = sequences.map((s) =>
        Array(s.length).fill(1).concat(Array(width - s.length).fill(0))
    );
    return { ids, mask };
}

export function serializeTokenizer(tokenizer: Tokenizer): object {
    return { terms: [...tokenizer.termToId.keys()] };
}

export function deserializeTokenizer(data: { terms: string[] }): Tokenizer {
    const termToId = new Map<string, number>();
    data.terms.forEach((t, i) => termToId.set(t, N_SPECIAL + i));
    return { termToId, vocabSize: N_SPECIAL + data.terms.length };
}
