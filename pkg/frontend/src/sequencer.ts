/** Monotone request sequencing: responses render only if no newer
 * request has rendered first, so rapid slider movement never shows an
 * out-of-order prediction. */
export class LatestWins {
  private issued = 0;
  private rendered = 0;

  /** Take a sequence number for a request about to be issued. */
  next(): number {
    this.issued += 1;
    return this.issued;
  }

  /** True exactly when this response is newer than anything rendered;
   * marks it rendered as a side effect. */
  accept(seq: number): boolean {
    if (seq <= this.rendered) return false;
    this.rendered = seq;
    return true;
  }

  /** Sequence number of the newest request issued so far. */
  get latest(): number {
    return this.issued;
  }
}
