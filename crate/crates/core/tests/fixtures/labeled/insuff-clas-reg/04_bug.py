from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

n = 3
qc = QuantumCircuit(n, n - 1)  # expect: insuff-clas-reg
for i in range(n):
    qc.h(i)
qc.measure(0, 0)
qc.measure(2, 1)
