#include <stdio.h>

#define MAX 100

/* Insert an element at a given position of an array. */
int main()
{
    int arr[MAX];
    int n, i, pos, value;

    n = 8;
    for (i = 0; i < n; i++) {
        arr[i] = (i + 1) * 3;
    }

    pos = 4;
    value = 99;

    if (pos < 1 || pos > n + 1) {
        printf("Invalid position\n");
        return 1;
    }
    if (n >= MAX) {
        printf("Array is full\n");
        return 1;
    }

    for (i = n - 1; i >= pos - 1; i--) {
        arr[i + 1] = arr[i];
    }
    arr[pos - 1] = value;
    n = n + 1;

    printf("Array after insertion:\n");
    for (i = 0; i < n; i++) {
        printf("%d ", arr[i]);
    }
    printf("\n");
    return 0;
}
