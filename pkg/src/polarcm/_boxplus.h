#ifndef PCM_BOXPLUS_H
#define PCM_BOXPLUS_H

#define PCM_LLR_MAX 40.0

void pcm_boxplus_exact(const double *a, const double *b, double *out, long n);

#endif
